#pragma once

#include <fmt/format.h>

#include <string>

namespace fvtree {

// Fixed 17-significant-digit formatting; round-trips every double.
inline std::string fmt17(double x) { return fmt::format("{:.17g}", x); }

}  // namespace fvtree
