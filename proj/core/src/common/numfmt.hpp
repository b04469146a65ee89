#pragma once

#include <cstdio>
#include <cstdlib>
#include <string>

namespace falconn::detail {

/// Shortest decimal text (up to 17 significant digits) that parses back to
/// exactly `v`.
inline std::string format_shortest(double v) {
  char buf[40];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

/// Fixed 17-significant-digit text; round-trips bit-exactly through strtod.
inline std::string format_exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace falconn::detail
