#pragma once

#include <string>

#include <fmt/format.h>

namespace promobn::detail {

// Canonical text form of a model number: up to 6 significant digits,
// no trailing zeros.
inline std::string format_number(double x) {
    if (x == 0.0) {
        return "0";
    }
    return fmt::format("{:.6g}", x);
}

}  // namespace promobn::detail
