#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "deepnotch/io/image.hpp"

namespace deepnotch::adversary {

// Binary per-pixel, per-channel mask selecting where noise is injected.
// Layout matches Image (row-major, channel-interleaved).
struct GuidanceMap {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<std::uint8_t> mask;
  double area_fraction = 0.0;  // achieved ones / (H * W), per channel

  static GuidanceMap ones(int height, int width, int channels);

  std::uint8_t at(int y, int x, int c) const {
    return mask[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::size_t count_ones(int channel) const;
  bool matches(const Image& img) const {
    return height == img.height() && width == img.width() && channels == img.channels();
  }
};

// Per channel, the round(alpha * H * W) entries of largest |M| get 1; ties
// go to the lower row-major index. alpha in (0, 1].
GuidanceMap guidance_map(const Image& perturbation, double alpha);

// One single-channel PNG per channel: <stem>_c<k>.png, ones white.
void save_guidance_pngs(const GuidanceMap& map, const std::filesystem::path& stem);

}  // namespace deepnotch::adversary
