#pragma once

#include <cstdint>
#include <string>

#include "slicereg/image.hpp"

namespace slicereg {

/// Load a PNG or TIFF raster (8/16-bit, 1 or 3 channels) as a ScalarImage.
/// Color inputs are reduced to luminance (0.299 R + 0.587 G + 0.114 B) and
/// integer intensities are divided by the type maximum. The format is detected
/// from the file's magic bytes. Throws on unreadable files, unsupported bit
/// depths/channel counts, and zero-sized images.
ScalarImage load_image(const std::string& path);

/// Intensity quantization shared by every 8-bit writer: round half up, clamp.
uint8_t quantize8(double v);

/// Write an 8-bit grayscale PNG; intensity*255, round half up, clamped.
void save_png(const ScalarImage& img, const std::string& path);

/// Write an uncompressed 8-bit grayscale baseline TIFF (same quantization as
/// save_png). Mainly useful for producing loader test inputs.
void save_tiff_gray8(const ScalarImage& img, const std::string& path);

}  // namespace slicereg
