#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace realism {

/// Fixed-point rendering with `digits` decimals; "-0.000" is normalized to "0.000".
std::string fmt_fixed(double v, int digits = 6);
/// Scientific rendering with `digits` mantissa decimals, for p-values.
std::string fmt_sci(double v, int digits = 6);

/// Splits one CSV line on commas (no quoting; fields never contain commas).
std::vector<std::string> split_csv_line(std::string_view line);

/// Strict double parse; throws ParseError on trailing garbage.
double parse_double(std::string_view s);

}  // namespace realism
