#pragma once

#include <filesystem>

#include "deepnotch/io/image.hpp"

namespace deepnotch::io {

// Reads an 8-bit grayscale or RGB PNG; value i maps to i/255. Palette, alpha
// and 16-bit files raise CodecError; a missing file raises IoError.
Image load_image(const std::filesystem::path& path);

// Writes round(v*255) clamped to [0, 255]. The encoding carries no
// timestamps, so equal images give byte-identical files.
void save_image(const Image& img, const std::filesystem::path& path);

std::uint8_t quantize(float v);

}  // namespace deepnotch::io
