#pragma once

namespace mdcs {

inline constexpr const char* version = "0.1.0";

}  // namespace mdcs
