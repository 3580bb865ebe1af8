#pragma once

// Parsing helpers for the "name:key=value,key=value" descriptor grammar shared
// by model and q strings. Internal to the core library.

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cmest::detail {

struct Descriptor {
  std::string head;
  std::vector<std::pair<std::string, std::string>> params;
};

Descriptor split_descriptor(std::string_view text);

/// Parses a finite or infinite real; throws ParseError naming `key`.
double parse_number(std::string_view text, const std::string& key);

/// Consumes parameters by key and rejects leftovers.
class ParamReader {
 public:
  explicit ParamReader(Descriptor d) : d_(std::move(d)) {}

  std::optional<double> take(const std::string& key);
  double require(const std::string& key);
  /// Throws ParseError naming the first parameter nobody consumed.
  void finish() const;

 private:
  Descriptor d_;
  std::vector<bool> used_ = std::vector<bool>(d_.params.size(), false);
};

}  // namespace cmest::detail
