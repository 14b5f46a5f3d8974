#pragma once

#include <string>

namespace mset {

/// Shortest decimal text that parses back to exactly `v`.
std::string format_number(double v);

}  // namespace mset
