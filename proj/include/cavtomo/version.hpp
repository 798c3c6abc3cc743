#pragma once

namespace cavtomo {

inline constexpr const char* kVersion = "0.1.0";

} // namespace cavtomo
