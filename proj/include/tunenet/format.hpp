#pragma once

#include <cstdio>
#include <string>

namespace tunenet {

/// Shortest "%.17g"-style text that round-trips the value exactly.
inline std::string format_double(double v) {
  char buf[32];
  for (int precision = 9; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    double back = 0.0;
    if (std::sscanf(buf, "%lf", &back) == 1 && back == v) break;
  }
  return buf;
}

}  // namespace tunenet
