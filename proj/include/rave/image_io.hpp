#pragma once

#include <filesystem>

#include "rave/splat.hpp"

namespace rave {

/// Reads an 8-bit PNG (gray, RGB or RGBA; alpha composited over white) or a
/// binary PPM (P6). The format is detected from the file signature.
ImageBuffer read_image(const std::filesystem::path& path);

/// Writes an 8-bit RGB PNG, channels rounded to the nearest of 256 levels.
void write_png(const std::filesystem::path& path, const ImageBuffer& image);

/// Rounds every channel to k/255, as a write/read round trip through PNG would.
ImageBuffer quantize_to_8bit(const ImageBuffer& image);

}  // namespace rave
