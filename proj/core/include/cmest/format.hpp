#pragma once

#include <string>

namespace cmest {

/// Shortest decimal text that reads back to exactly `v` ("inf", "-inf" and
/// "nan" for the special values). Used for descriptor ids and reports.
std::string format_number(double v);

}  // namespace cmest
