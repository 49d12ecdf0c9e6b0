#pragma once

#include <filesystem>

#include "sonomyo/frame.hpp"

namespace sonomyo {

// Lossless 8-bit grayscale PNG. The timestamp is not stored.
void write_png(const std::filesystem::path& path, const Frame& frame);
Frame read_png(const std::filesystem::path& path);

}  // namespace sonomyo
