#pragma once

#include <filesystem>

#include "bottlescan/image.hpp"

namespace bottlescan {

// Binary PGM (P5, maxval 255). Load maps byte b -> b/255, save maps v -> round(v*255).
Image read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const Image& img);

}  // namespace bottlescan
