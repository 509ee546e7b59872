#pragma once

#include <cstdio>
#include <string>

namespace lae::csv {

/// Deterministic shortest-ish decimal rendering; 12 significant digits
/// for report files, 17 where a bit-exact round trip is needed.
inline std::string fmt(double v, int digits = 12) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return std::string(buf);
}

} // namespace lae::csv
