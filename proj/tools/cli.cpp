#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cmest/errors.hpp"
#include "cmest/estimator.hpp"
#include "cmest/format.hpp"
#include "cmest/models.hpp"
#include "cmest/qfunc.hpp"
#include "cmest/verify.hpp"

namespace cmest::cli {

namespace {

using Json = nlohmann::ordered_json;

// Raised for bad input that is neither a model/q parse error nor a domain
// error: unreadable files, malformed lists.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GlobalOptions {
  std::string out_path;
  std::uint64_t seed = 7;
  double tol = 1e-10;
};

struct DataRow {
  std::string label;
  std::optional<double> value;
  std::string error;
};

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) parts.push_back(trim(item));
  if (!s.empty() && s.back() == sep) parts.emplace_back();
  return parts;
}

std::optional<double> to_number(const std::string& text) {
  if (text.empty()) return std::nullopt;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    return std::nullopt;
  }
  if (used != text.size()) return std::nullopt;
  return v;
}

std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> values;
  for (const auto& item : split(text, ',')) {
    const auto v = to_number(item);
    if (!v || !std::isfinite(*v)) throw UsageError(what + ": '" + item + "' is not a finite number");
    values.push_back(*v);
  }
  if (values.empty()) throw UsageError(what + ": empty list");
  return values;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write '" + path + "'");
  out << text;
}

DataRow row_from_text(std::size_t index, const std::string& text) {
  DataRow row{"row " + std::to_string(index + 1), std::nullopt, {}};
  const auto v = to_number(text);
  if (!v) {
    row.error = "not a number: '" + text + "'";
  } else if (!std::isfinite(*v)) {
    row.error = "value is not finite";
  } else {
    row.value = *v;
  }
  return row;
}

bool is_index(const std::string& column) {
  return !column.empty() && std::all_of(column.begin(), column.end(), [](unsigned char c) { return std::isdigit(c); });
}

// Comma-separated, optional header line, one value per row in the chosen
// column. Blank lines are skipped.
std::vector<DataRow> read_csv(const std::string& text, const std::string& column) {
  std::vector<std::vector<std::string>> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    lines.push_back(split(line, ','));
  }
  if (lines.empty()) throw UsageError("data file has no rows");
  std::size_t col = 0;
  bool header = false;
  if (column.empty() || is_index(column)) {
    col = column.empty() ? 0 : std::stoul(column);
    header = col < lines[0].size() && !to_number(lines[0][col]);
  } else {
    const auto& names = lines[0];
    const auto it = std::find(names.begin(), names.end(), column);
    if (it == names.end()) throw UsageError("column '" + column + "' not found in the header");
    col = static_cast<std::size_t>(it - names.begin());
    header = true;
  }
  std::vector<DataRow> rows;
  for (std::size_t i = header ? 1 : 0; i < lines.size(); ++i) {
    const std::size_t index = rows.size();
    if (col >= lines[i].size()) {
      rows.push_back({"row " + std::to_string(index + 1), std::nullopt, "missing column " + std::to_string(col)});
    } else {
      rows.push_back(row_from_text(index, lines[i][col]));
    }
  }
  if (rows.empty()) throw UsageError("data file has a header but no rows");
  return rows;
}

DataRow row_from_json(std::size_t index, const Json& v) {
  DataRow row{"row " + std::to_string(index + 1), std::nullopt, {}};
  if (!v.is_number()) {
    row.error = "not a number: " + v.dump();
  } else {
    row.value = v.get<double>();
  }
  return row;
}

// [1, 2, ...], {"col": [1, 2, ...]} or [{"col": 1}, {"col": 2}, ...].
std::vector<DataRow> read_json_data(const std::string& text, const std::string& column) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw UsageError(std::string("data file is not valid JSON: ") + e.what());
  }
  std::vector<DataRow> rows;
  if (j.is_object()) {
    std::string key = column;
    if (key.empty()) {
      if (j.size() != 1) throw UsageError("JSON object with several keys: pick one with --column");
      key = j.begin().key();
    }
    if (!j.contains(key) || !j[key].is_array()) throw UsageError("JSON key '" + key + "' is not an array");
    j = j[key];
    for (std::size_t i = 0; i < j.size(); ++i) rows.push_back(row_from_json(i, j[i]));
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (j[i].is_object()) {
        if (column.empty()) throw UsageError("JSON rows are objects: pick a field with --column");
        if (!j[i].contains(column)) {
          rows.push_back({"row " + std::to_string(i + 1), std::nullopt, "missing field '" + column + "'"});
        } else {
          rows.push_back(row_from_json(i, j[i][column]));
        }
      } else {
        rows.push_back(row_from_json(i, j[i]));
      }
    }
  } else {
    throw UsageError("JSON data must be an array or an object");
  }
  if (rows.empty()) throw UsageError("data file has no values");
  return rows;
}

std::vector<DataRow> read_data(const std::string& path, const std::string& column) {
  const std::string text = read_file(path);
  const bool json = path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0;
  return json ? read_json_data(text, column) : read_csv(text, column);
}

std::string method_label(const Estimate& e) {
  if (e.method == Method::closed_form) return std::string("closed_form(") + to_string(e.closed_form) + ")";
  return "quadrature";
}

std::vector<Transform> parse_transforms(const std::vector<std::string>& items) {
  std::vector<Transform> out;
  for (const auto& t : items) out.push_back(parse_transform(t));
  return out;
}

std::string verify_line(const McReport& r) {
  std::ostringstream s;
  s << r.model_id << ' ' << r.q_id << ' ' << r.transform_id << " theta=" << format_number(r.theta)
    << " n=" << r.n << " seed=" << r.seed << " mean=" << format_number(r.sample_mean)
    << " se=" << format_number(r.std_error) << " target=" << format_number(r.target)
    << " z=" << format_number(r.z_score) << (r.pass ? " PASS" : " FAIL");
  return s.str();
}

// Only fields that survive the JSON round trip, so a replayed report prints
// exactly the same text.
void print_campaign(const CampaignResult& c, std::ostream& out) {
  for (const auto& r : c.reports) out << verify_line(r) << '\n';
  for (const auto& e : c.errors) out << "error at theta=" << format_number(e.theta) << ": " << e.message << '\n';
  out << "summary: pass=" << c.pass() << " fail=" << c.fail() << '\n';
}

struct EstimateArgs {
  std::string model;
  std::string q = "recip";
  std::string x;
  std::string data;
  std::string column;
  std::vector<std::string> transforms;
  bool sufficient = false;
  bool force_quadrature = false;
};

int cmd_estimate(const EstimateArgs& a, const GlobalOptions& g, std::ostream& out, std::ostream& err) {
  ExpFamilyModel model = models::parse_model(a.model);
  const QFunction q = qfunc::parse_q(a.q);
  const auto transforms = parse_transforms(a.transforms);

  std::vector<DataRow> rows;
  if (!a.x.empty()) {
    std::size_t i = 0;
    for (double v : parse_list(a.x, "--x")) rows.push_back({"row " + std::to_string(++i), v, {}});
  } else {
    rows = read_data(a.data, a.column);
  }

  if (a.sufficient) {
    // T = sum of the sample, under the catalog model of the sum.
    std::vector<double> values;
    for (const auto& r : rows) {
      if (!r.value) throw UsageError(r.label + ": " + r.error + " (a sufficient statistic needs every value)");
      values.push_back(*r.value);
    }
    model = models::sufficient_statistic(model, values.size());
    const double t = std::accumulate(values.begin(), values.end(), 0.0);
    rows = {{"T (n=" + std::to_string(values.size()) + ")", t, {}}};
  }

  EstimatorOptions options;
  options.force_quadrature = a.force_quadrature;
  options.tol = {g.tol, 1e-12};
  const EstimatorSpec spec = resolve(model, q, transforms, options);

  Json report;
  report["version"] = 1;
  report["model_id"] = spec.model_id();
  report["q_id"] = spec.q_id();
  report["transform_id"] = spec.transform_id();
  report["estimates"] = Json::array();
  bool any_error = false;
  for (const auto& row : rows) {
    Json j;
    j["label"] = row.label;
    j["x"] = row.value ? Json(*row.value) : Json(nullptr);
    if (!row.value) {
      any_error = true;
      out << row.label << "\terror: " << row.error << '\n';
      j["error"] = row.error;
      report["estimates"].push_back(j);
      continue;
    }
    try {
      const Estimate e = evaluate(spec, *row.value);
      out << "x=" << format_number(*row.value) << "\testimate=" << format_number(e.value)
          << "\tmethod=" << method_label(e);
      if (e.error_bound) out << "\terror_bound=" << format_number(*e.error_bound);
      if (!std::isfinite(e.value)) out << "\tlog_estimate=" << format_number(e.log_value);
      out << '\n';
      j["value"] = e.value;
      j["log_value"] = e.log_value;
      j["method"] = method_label(e);
      j["error_bound"] = e.error_bound ? Json(*e.error_bound) : Json(nullptr);
    } catch (const std::exception& ex) {
      any_error = true;
      out << "x=" << format_number(*row.value) << "\terror: " << ex.what() << '\n';
      j["error"] = ex.what();
    }
    report["estimates"].push_back(j);
  }
  if (!g.out_path.empty()) write_file(g.out_path, report.dump(2) + "\n");
  if (any_error) err << "some inputs could not be estimated\n";
  return any_error ? kUsageError : kOk;
}

struct VerifyArgs {
  std::string model;
  std::string q = "recip";
  std::vector<std::string> transforms;
  std::string thetas;
  std::size_t n = 1'000'000;
  double z_max = 4.0;
  std::string mode = "auto";
  bool record_timing = false;
  std::string replay;
};

CertifyMode parse_mode(const std::string& m) {
  if (m == "auto") return CertifyMode::automatic;
  if (m == "ztest") return CertifyMode::z_test;
  if (m == "tail-split") return CertifyMode::tail_split;
  if (m == "mom") return CertifyMode::median_of_means;
  throw UsageError("--mode must be one of auto, ztest, tail-split, mom");
}

int cmd_verify(const VerifyArgs& a, const GlobalOptions& g, std::ostream& out, std::ostream& err) {
  if (!a.replay.empty()) {
    const CampaignResult c = campaign_from_json(read_file(a.replay));
    print_campaign(c, out);
    return c.fail() == 0 ? kOk : kStatisticalFailure;
  }
  if (a.model.empty()) throw UsageError("verify needs --model (or --replay)");
  if (a.thetas.empty()) throw UsageError("verify needs --thetas");
  const EstimatorSpec spec = resolve(models::parse_model(a.model), qfunc::parse_q(a.q),
                                     parse_transforms(a.transforms), {false, {g.tol, 1e-12}});
  const auto thetas = parse_list(a.thetas, "--thetas");
  for (double t : thetas) check_theta(spec, t);

  CertifyOptions options;
  options.z_max = a.z_max;
  options.mode = parse_mode(a.mode);
  options.record_timing = a.record_timing;
  const CampaignResult c = certify_grid(spec, thetas, a.n, g.seed, options);
  print_campaign(c, out);
  for (const auto& r : c.reports) {
    if (r.heavy_tailed) {
      err << "note: theta=" << format_number(r.theta) << ": the estimator has infinite variance; certified by "
          << r.method << '\n';
    }
  }
  if (!g.out_path.empty()) write_file(g.out_path, campaign_to_json(c));
  return c.fail() == 0 ? kOk : kStatisticalFailure;
}

int cmd_divergence(double theta, std::size_t streams, const GlobalOptions& g, std::ostream& out) {
  DivergenceOptions options;
  options.seed = g.seed;
  options.streams = streams;
  const DivergenceReport rep = divergence_demo(theta, options);
  out << "theta=" << format_number(rep.theta) << " seed=" << rep.seed << '\n';
  out << "log g increases strictly as x decreases from " << format_number(rep.increasing_below) << '\n';
  for (const auto& c : rep.threshold_crossings) {
    out << "g > " << format_number(c.level) << " for x < " << format_number(c.x) << '\n';
  }
  for (const auto& s : rep.running_second_moment) {
    out << "n=" << s.n << " median running E[delta^2]=" << format_number(s.second_moment) << '\n';
  }
  out << "second moment nondecreasing: " << (rep.second_moment_nondecreasing ? "yes" : "no") << '\n';
  if (!g.out_path.empty()) write_file(g.out_path, divergence_to_json(rep));
  return kOk;
}

int cmd_catalog(std::ostream& out) {
  out << "models:\n";
  for (const auto& e : models::catalog()) out << "  " << e.grammar << "\n      " << e.description << '\n';
  out << "q functions:\n"
         "  recip                    q = 1/theta\n"
         "  power:k=<v>              q = theta^-k\n"
         "  shiftpow:b=<v>,k=<v>     q = (b + theta)^-k\n"
         "  window:d1=<v>,d2=<v>     q = (e^-d1 theta - e^-d2 theta)/theta, d2=inf allowed\n"
         "  w1*q1+w2*q2              weighted sums of the above\n"
         "transforms:\n"
         "  shift:theta0=<v>         estimate q(theta - theta0)\n"
         "  flip                     observe -X\n"
         "  trunc:b=<v>              truncate the support at b\n";
  out << "closed forms:\n";
  const char* const qs[] = {"recip", "power:k=2", "shiftpow:b=1,k=1", "shiftpow:b=1,k=2", "window:d1=0,d2=1"};
  for (const auto& e : models::catalog()) {
    for (const char* qs_id : qs) {
      const auto spec = resolve(e.example, qfunc::parse_q(qs_id));
      out << "  " << e.example.name << '\t' << qs_id << '\t' << "closed_form="
          << (spec.method == Method::closed_form ? "yes" : "no");
      if (spec.method == Method::closed_form) out << " (" << to_string(spec.closed_form) << ')';
      out << '\n';
    }
  }
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Unbiased estimators of completely monotone functions of an exponential-family parameter"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  app.add_option("--out", g.out_path, "Write a JSON report to this path");
  app.add_option("--seed", g.seed, "Base random seed")->capture_default_str();
  app.add_option("--tol", g.tol, "Absolute quadrature tolerance")->check(CLI::PositiveNumber)->capture_default_str();

  EstimateArgs ea;
  auto* est = app.add_subcommand("estimate", "Evaluate the estimator at observed data");
  est->add_option("--model", ea.model, "Model descriptor, e.g. gamma:alpha=2")->required();
  est->add_option("--q", ea.q, "Target descriptor, e.g. recip or power:k=2")->capture_default_str();
  auto* x_opt = est->add_option("--x", ea.x, "Comma-separated observations");
  auto* data_opt = est->add_option("--data", ea.data, "CSV or JSON data file");
  x_opt->excludes(data_opt);
  est->add_option("--column", ea.column, "Column name or 0-based index in --data")->needs(data_opt);
  est->add_option("--transform", ea.transforms, "shift:theta0=<v>, flip or trunc:b=<v> (repeatable)");
  est->add_flag("--sufficient", ea.sufficient, "Reduce the sample to its sum before estimating");
  est->add_flag("--force-quadrature", ea.force_quadrature, "Bypass closed forms");

  VerifyArgs va;
  auto* ver = app.add_subcommand("verify", "Monte Carlo certification over a theta grid");
  ver->add_option("--model", va.model, "Model descriptor");
  ver->add_option("--q", va.q, "Target descriptor")->capture_default_str();
  ver->add_option("--transform", va.transforms, "Transform (repeatable)");
  ver->add_option("--thetas", va.thetas, "Comma-separated parameter values");
  ver->add_option("--n", va.n, "Draws per grid point")->check(CLI::Range(std::size_t{10'000}, std::size_t{1} << 40))
      ->capture_default_str();
  ver->add_option("--z-max", va.z_max, "Pass threshold on |z|")->check(CLI::PositiveNumber)->capture_default_str();
  ver->add_option("--mode", va.mode, "auto, ztest, tail-split or mom")->capture_default_str();
  ver->add_flag("--record-timing", va.record_timing, "Record wall time and a timestamp (breaks reproducibility)");
  ver->add_option("--replay", va.replay, "Re-read a JSON report, validate it and print its summary");

  double theta = 1.0;
  std::size_t streams = 16;
  auto* div = app.add_subcommand("demo-divergence", "Show that E[delta^2] is infinite for the normal model");
  div->add_option("--theta", theta, "theta > 0")->capture_default_str();
  div->add_option("--streams", streams, "Independent streams for the running second moment")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  auto* cat = app.add_subcommand("catalog", "List models, targets, transforms and closed forms");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    if (est->parsed()) {
      if (ea.x.empty() && ea.data.empty()) throw UsageError("estimate needs --x or --data");
      return cmd_estimate(ea, g, out, err);
    }
    if (ver->parsed()) return cmd_verify(va, g, out, err);
    if (div->parsed()) return cmd_divergence(theta, streams, g, out);
    if (cat->parsed()) return cmd_catalog(out);
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const ConvergenceError& e) {
    err << "error: " << e.what() << " (achieved error " << format_number(e.achieved_error()) << ")\n";
    return kUsageError;
  }
  return kUsageError;
}

}  // namespace cmest::cli
