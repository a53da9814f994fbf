#pragma once

namespace redmoment {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace redmoment
