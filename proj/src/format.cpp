#include "mset/format.hpp"

#include <charconv>
#include <cmath>

namespace mset {

std::string format_number(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    if (v == 0.0) {
        return "0";
    }
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace mset
