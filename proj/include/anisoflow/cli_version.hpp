#pragma once

namespace aniso {
inline constexpr const char* version_string = "anisoflow 0.1.0";
}
