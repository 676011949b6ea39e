#pragma once

namespace uqmc {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace uqmc
