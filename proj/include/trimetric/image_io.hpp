#ifndef TRIMETRIC_IMAGE_IO_HPP_
#define TRIMETRIC_IMAGE_IO_HPP_

#include <string>

#include "trimetric/tensor.hpp"

namespace trimetric {

// Decoders return (3, H, W) tensors with values in [0, 1]. Grayscale
// sources are replicated across channels; alpha is dropped.
Tensor read_ppm(const std::string& path);
Tensor read_png(const std::string& path);

// Dispatch on file extension (.ppm/.pnm/.pgm via the PPM reader, .png via
// libpng). Throws ConfigError for anything else.
Tensor read_image(const std::string& path);

// 8-bit binary PPM (P6), values rounded from [0, 1].
void write_ppm(const std::string& path, const Tensor& image);

}  // namespace trimetric

#endif  // TRIMETRIC_IMAGE_IO_HPP_
