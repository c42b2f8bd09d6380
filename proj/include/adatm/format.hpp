#pragma once

#include <charconv>
#include <string>

namespace adatm {

/// Shortest text that round-trips to the same double.
inline std::string format_number(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

} // namespace adatm
