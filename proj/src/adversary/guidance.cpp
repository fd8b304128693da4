#include "deepnotch/adversary/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "deepnotch/errors.hpp"
#include "deepnotch/io/png.hpp"

namespace deepnotch::adversary {

GuidanceMap GuidanceMap::ones(int height, int width, int channels) {
  GuidanceMap g;
  g.height = height;
  g.width = width;
  g.channels = channels;
  g.mask.assign(static_cast<std::size_t>(height) * width * channels, 1);
  g.area_fraction = 1.0;
  return g;
}

std::size_t GuidanceMap::count_ones(int channel) const {
  std::size_t n = 0;
  for (std::size_t i = channel; i < mask.size(); i += channels) n += mask[i];
  return n;
}

GuidanceMap guidance_map(const Image& perturbation, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ContractError("guidance_map: alpha must lie in (0, 1]");
  const int H = perturbation.height(), W = perturbation.width(), C = perturbation.channels();
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  const auto keep = static_cast<std::size_t>(std::lround(alpha * static_cast<double>(plane)));
  GuidanceMap g;
  g.height = H;
  g.width = W;
  g.channels = C;
  g.mask.assign(plane * C, 0);
  g.area_fraction = static_cast<double>(keep) / static_cast<double>(plane);
  const auto px = perturbation.pixels();
  std::vector<std::size_t> idx(plane);
  for (int c = 0; c < C; ++c) {
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    auto mag = [&](std::size_t p) { return std::fabs(px[p * C + c]); };
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return mag(a) > mag(b); });
    for (std::size_t k = 0; k < keep; ++k) g.mask[idx[k] * C + c] = 1;
  }
  return g;
}

void save_guidance_pngs(const GuidanceMap& map, const std::filesystem::path& stem) {
  for (int c = 0; c < map.channels; ++c) {
    Image img(map.height, map.width, 1);
    auto px = img.pixels();
    for (std::size_t p = 0; p < px.size(); ++p) px[p] = map.mask[p * map.channels + c] ? 1.0f : 0.0f;
    auto path = stem;
    path += "_c" + std::to_string(c) + ".png";
    io::save_image(img, path);
  }
}

}  // namespace deepnotch::adversary
