#include <algorithm>
#include <limits>

#include <json.hpp>

#include "cmest/errors.hpp"
#include "cmest/verify.hpp"

namespace cmest {

namespace {

using Json = nlohmann::ordered_json;

constexpr int kSchemaVersion = 1;

Json to_json(const McReport& r) {
  Json j;
  j["model_id"] = r.model_id;
  j["q_id"] = r.q_id;
  j["transform_id"] = r.transform_id;
  j["theta"] = r.theta;
  j["n"] = r.n;
  j["seed"] = r.seed;
  j["sample_mean"] = r.sample_mean;
  j["std_error"] = r.std_error;
  j["target"] = r.target;
  j["z_score"] = r.z_score;
  j["pass"] = r.pass;
  j["wall_time_ms"] = r.wall_time_ms;
  return j;
}

const Json& field(const Json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) throw ParseError(where + ": expected an object", where);
  const auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(where + ": missing field '" + key + "'", key);
  return *it;
}

std::string get_string(const Json& obj, const char* key, const std::string& where) {
  const Json& v = field(obj, key, where);
  if (!v.is_string()) throw ParseError(where + "." + key + ": expected a string", key);
  return v.get<std::string>();
}

// Non-finite doubles are written as null.
double get_number(const Json& obj, const char* key, const std::string& where) {
  const Json& v = field(obj, key, where);
  if (v.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (!v.is_number()) throw ParseError(where + "." + key + ": expected a number", key);
  return v.get<double>();
}

template <class Int>
Int get_unsigned(const Json& obj, const char* key, const std::string& where) {
  const Json& v = field(obj, key, where);
  if (!v.is_number_unsigned()) throw ParseError(where + "." + key + ": expected a nonnegative integer", key);
  return v.get<Int>();
}

bool get_bool(const Json& obj, const char* key, const std::string& where) {
  const Json& v = field(obj, key, where);
  if (!v.is_boolean()) throw ParseError(where + "." + key + ": expected a boolean", key);
  return v.get<bool>();
}

McReport report_from_json(const Json& j, const std::string& where) {
  static const char* const kFields[] = {"model_id", "q_id",      "transform_id", "theta",
                                        "n",        "seed",      "sample_mean",  "std_error",
                                        "target",   "z_score",   "pass",         "wall_time_ms"};
  if (!j.is_object()) throw ParseError(where + ": expected an object", where);
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(std::begin(kFields), std::end(kFields), [&](const char* f) { return key == f; }) ==
        std::end(kFields)) {
      throw ParseError(where + ": unknown field '" + key + "'", key);
    }
  }
  McReport r;
  r.model_id = get_string(j, "model_id", where);
  r.q_id = get_string(j, "q_id", where);
  r.transform_id = get_string(j, "transform_id", where);
  r.theta = get_number(j, "theta", where);
  r.n = get_unsigned<std::size_t>(j, "n", where);
  r.seed = get_unsigned<std::uint64_t>(j, "seed", where);
  r.sample_mean = get_number(j, "sample_mean", where);
  r.std_error = get_number(j, "std_error", where);
  r.target = get_number(j, "target", where);
  r.z_score = get_number(j, "z_score", where);
  r.pass = get_bool(j, "pass", where);
  const Json& wt = field(j, "wall_time_ms", where);
  if (!wt.is_number_integer()) throw ParseError(where + ".wall_time_ms: expected an integer", "wall_time_ms");
  r.wall_time_ms = wt.get<std::int64_t>();
  return r;
}

}  // namespace

std::string campaign_to_json(const CampaignResult& campaign) {
  Json j;
  j["version"] = kSchemaVersion;
  j["timestamp"] = campaign.timestamp ? Json(*campaign.timestamp) : Json(nullptr);
  j["reports"] = Json::array();
  for (const auto& r : campaign.reports) j["reports"].push_back(to_json(r));
  j["summary"] = {{"pass", campaign.pass()}, {"fail", campaign.fail()}};
  j["errors"] = Json::array();
  for (const auto& e : campaign.errors) {
    j["errors"].push_back({{"index", e.index}, {"theta", e.theta}, {"message", e.message}});
  }
  return j.dump(2) + "\n";
}

CampaignResult campaign_from_json(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("report is not valid JSON: ") + e.what(), "json");
  }
  const std::string top = "report";
  const Json& version = field(j, "version", top);
  if (!version.is_number_integer() || version.get<int>() != kSchemaVersion) {
    throw ParseError("report.version: unsupported schema version", "version");
  }
  CampaignResult c;
  const Json& ts = field(j, "timestamp", top);
  if (ts.is_string()) {
    c.timestamp = ts.get<std::string>();
  } else if (!ts.is_null()) {
    throw ParseError("report.timestamp: expected a string or null", "timestamp");
  }
  const Json& reports = field(j, "reports", top);
  if (!reports.is_array()) throw ParseError("report.reports: expected an array", "reports");
  for (std::size_t i = 0; i < reports.size(); ++i) {
    c.reports.push_back(report_from_json(reports[i], "reports[" + std::to_string(i) + "]"));
  }
  if (const auto it = j.find("errors"); it != j.end()) {
    if (!it->is_array()) throw ParseError("report.errors: expected an array", "errors");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const std::string where = "errors[" + std::to_string(i) + "]";
      const Json& e = (*it)[i];
      c.errors.push_back({get_unsigned<std::size_t>(e, "index", where), get_number(e, "theta", where),
                          get_string(e, "message", where)});
    }
  }
  const Json& summary = field(j, "summary", top);
  const auto pass = get_unsigned<std::size_t>(summary, "pass", "summary");
  const auto fail = get_unsigned<std::size_t>(summary, "fail", "summary");
  if (pass != c.pass()) throw ParseError("summary.pass disagrees with the reports", "pass");
  if (fail != c.fail()) throw ParseError("summary.fail disagrees with the reports", "fail");
  return c;
}

std::string divergence_to_json(const DivergenceReport& report) {
  Json j;
  j["version"] = kSchemaVersion;
  j["theta"] = report.theta;
  j["seed"] = report.seed;
  j["g_values"] = Json::array();
  for (const auto& p : report.g_values) j["g_values"].push_back({{"x", p.x}, {"log_g", p.log_g}, {"g", p.g}});
  j["increasing_below"] = report.increasing_below;
  j["threshold_crossings"] = Json::array();
  for (const auto& c : report.threshold_crossings) {
    j["threshold_crossings"].push_back({{"level", c.level}, {"x", c.x}});
  }
  j["running_second_moment"] = Json::array();
  for (const auto& s : report.running_second_moment) {
    j["running_second_moment"].push_back(
        {{"n", s.n}, {"second_moment", s.second_moment}, {"per_stream", s.per_stream}});
  }
  j["second_moment_nondecreasing"] = report.second_moment_nondecreasing;
  return j.dump(2) + "\n";
}

}  // namespace cmest
