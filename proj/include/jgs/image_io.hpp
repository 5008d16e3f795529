#pragma once

#include <string>

#include "jgs/renderer.hpp"

namespace jgs {

// 8-bit image I/O. Buffers are linear; files store gamma-encoded values
// (gamma 1/2.2). PNG when built with libpng, PPM (P6) always. Writes are
// atomic (temp file + rename). The quantization round-trip bound of 1/255
// holds in the encoded domain.
void write_image(const ImageBuffer& buffer, const std::string& path);
ImageBuffer read_image(const std::string& path);

double linear_to_encoded(double v);  // clamp + gamma 1/2.2
double encoded_to_linear(double v);

}  // namespace jgs
