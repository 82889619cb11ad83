#pragma once

// Text output helpers shared by the CSV writers: shortest round-trip decimal
// for doubles, and a leading "# schema: <name>" comment line.

#include <charconv>
#include <cmath>
#include <string>
#include <system_error>

namespace latshape {

inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string csv_schema_line(const std::string& schema) { return "# schema: " + schema + "\n"; }

}  // namespace latshape
