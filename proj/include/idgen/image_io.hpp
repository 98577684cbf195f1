#pragma once

#include <string>

#include "idgen/avatar.hpp"
#include "idgen/tensor.hpp"

namespace idgen {

// Binary PPM (P6, maxval 255) for [3,H,W] images in [0,1]; binary PGM (P5)
// for masks. Round trips quantize to 8 bits.
void write_ppm(const std::string& path, const Tensor& image);
Tensor read_ppm(const std::string& path);
void write_pgm(const std::string& path, const Mask& mask, int width, int height);

}  // namespace idgen
