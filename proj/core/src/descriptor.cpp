#include "descriptor.hpp"

#include <charconv>
#include <cmath>
#include <limits>

#include "cmest/errors.hpp"
#include "cmest/format.hpp"

namespace cmest {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace detail {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

}  // namespace

Descriptor split_descriptor(std::string_view text) {
  text = trim(text);
  Descriptor d;
  const auto colon = text.find(':');
  d.head = std::string(trim(text.substr(0, colon)));
  if (d.head.empty()) throw ParseError("empty descriptor name", std::string(text));
  if (colon == std::string_view::npos) return d;
  std::string_view rest = text.substr(colon + 1);
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const std::string_view item = trim(rest.substr(0, comma));
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError("expected key=value, got '" + std::string(item) + "'", std::string(item));
    }
    std::string key(trim(item.substr(0, eq)));
    if (key.empty()) throw ParseError("missing key before '='", std::string(item));
    for (const auto& [k, v] : d.params) {
      if (k == key) throw ParseError("duplicate key '" + key + "'", key);
    }
    d.params.emplace_back(std::move(key), std::string(trim(item.substr(eq + 1))));
  }
  return d;
}

double parse_number(std::string_view text, const std::string& key) {
  text = trim(text);
  if (text == "inf" || text == "+inf" || text == "infinity") return std::numeric_limits<double>::infinity();
  if (text == "-inf" || text == "-infinity") return -std::numeric_limits<double>::infinity();
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size() || std::isnan(value)) {
    throw ParseError("invalid number '" + std::string(text) + "' for key '" + key + "'", key);
  }
  return value;
}

std::optional<double> ParamReader::take(const std::string& key) {
  for (std::size_t i = 0; i < d_.params.size(); ++i) {
    if (d_.params[i].first == key) {
      used_[i] = true;
      return parse_number(d_.params[i].second, key);
    }
  }
  return std::nullopt;
}

double ParamReader::require(const std::string& key) {
  if (auto v = take(key)) return *v;
  throw ParseError("'" + d_.head + "' requires key '" + key + "'", key);
}

void ParamReader::finish() const {
  for (std::size_t i = 0; i < d_.params.size(); ++i) {
    if (!used_[i]) {
      throw ParseError("unknown key '" + d_.params[i].first + "' for '" + d_.head + "'",
                       d_.params[i].first);
    }
  }
}

}  // namespace detail
}  // namespace cmest
