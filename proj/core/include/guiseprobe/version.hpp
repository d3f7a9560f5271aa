#pragma once

namespace gp {

inline constexpr const char* kToolkitVersion = "0.1.0";

}  // namespace gp
