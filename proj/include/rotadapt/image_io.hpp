#pragma once

#include <filesystem>

#include "rotadapt/types.hpp"

namespace rotadapt {

// Binary PPM (P6, maxval 255); values map to [0,1].
Image read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const Image& img);

Image center_crop_square(const Image& img);
Image resize_bilinear(const Image& img, int out_h, int out_w);

}  // namespace rotadapt
