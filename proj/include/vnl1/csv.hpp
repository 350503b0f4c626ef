#pragma once
#include <cstdio>
#include <string>

namespace vnl1 {

// Round-trip decimal form, stable across runs.
inline std::string csv_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace vnl1
