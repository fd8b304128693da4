#include "deepnotch/spectral/fft.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "deepnotch/errors.hpp"
#include "deepnotch/io/png.hpp"

namespace deepnotch::spectral {

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

int next_power_of_two(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

void fft1d(std::span<Complex> a, bool inverse) {
  const std::size_t n = a.size();
  if (!is_power_of_two(static_cast<int>(n))) throw DimensionError("fft1d: size " + std::to_string(n) + " is not a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    for (std::size_t k = 0; k < half; ++k) {
      // Direct twiddle evaluation keeps the error independent of n.
      const double ang = sign * 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(len);
      const Complex w(std::cos(ang), std::sin(ang));
      for (std::size_t i = k; i < n; i += len) {
        const Complex u = a[i];
        const Complex v = a[i + half] * w;
        a[i] = u + v;
        a[i + half] = u - v;
      }
    }
  }
  if (inverse) {
    const double s = 1.0 / static_cast<double>(n);
    for (auto& x : a) x *= s;
  }
}

namespace {

// 2-D transform of a natural-order H x W grid, in place.
void fft2d_inplace(std::vector<Complex>& g, int H, int W, bool inverse) {
  for (int y = 0; y < H; ++y) fft1d(std::span<Complex>(g.data() + static_cast<std::size_t>(y) * W, W), inverse);
  std::vector<Complex> col(H);
  for (int x = 0; x < W; ++x) {
    for (int y = 0; y < H; ++y) col[y] = g[static_cast<std::size_t>(y) * W + x];
    fft1d(col, inverse);
    for (int y = 0; y < H; ++y) g[static_cast<std::size_t>(y) * W + x] = col[y];
  }
}

int reflect(int i, int n) {
  const int period = 2 * n;
  i = ((i % period) + period) % period;
  return i < n ? i : period - 1 - i;
}

}  // namespace

std::vector<float> luminance(const Image& img) {
  if (img.channels() == 1) return img.channel(0);
  std::vector<float> out(static_cast<std::size_t>(img.height()) * img.width());
  const auto px = img.pixels();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = 0.299f * px[3 * i] + 0.587f * px[3 * i + 1] + 0.114f * px[3 * i + 2];
  }
  return out;
}

Spectrum fft2d(std::span<const float> plane, int height, int width, PadMode pad) {
  if (plane.size() != static_cast<std::size_t>(height) * width) throw ContractError("fft2d: plane size mismatch");
  int H = height, W = width;
  if (!is_power_of_two(H) || !is_power_of_two(W)) {
    if (pad != PadMode::kMirror) {
      throw DimensionError("fft2d: " + std::to_string(height) + "x" + std::to_string(width) +
                           " is not a power of two; pass the mirror-pad flag to extend it");
    }
    H = next_power_of_two(H);
    W = next_power_of_two(W);
  }
  std::vector<Complex> g(static_cast<std::size_t>(H) * W);
  for (int y = 0; y < H; ++y) {
    const int sy = reflect(y, height);
    for (int x = 0; x < W; ++x) g[static_cast<std::size_t>(y) * W + x] = plane[static_cast<std::size_t>(sy) * width + reflect(x, width)];
  }
  fft2d_inplace(g, H, W, false);
  Spectrum s{H, W, std::vector<Complex>(g.size())};
  for (int v = 0; v < H; ++v) {
    for (int u = 0; u < W; ++u) s.at(u, v) = g[static_cast<std::size_t>(v) * W + u];
  }
  return s;
}

Spectrum fft2d(const Image& img, PadMode pad) {
  const auto lum = luminance(img);
  return fft2d(lum, img.height(), img.width(), pad);
}

std::vector<double> ifft2d(const Spectrum& s) {
  const int H = s.height, W = s.width;
  std::vector<Complex> g(static_cast<std::size_t>(H) * W);
  for (int v = 0; v < H; ++v) {
    for (int u = 0; u < W; ++u) g[static_cast<std::size_t>(v) * W + u] = s.at(u, v);
  }
  fft2d_inplace(g, H, W, true);
  std::vector<double> out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = g[i].real();
  return out;
}

Image ifft2d_image(const Spectrum& s) {
  const auto re = ifft2d(s);
  std::vector<float> px(re.size());
  for (std::size_t i = 0; i < re.size(); ++i) px[i] = static_cast<float>(std::clamp(re[i], 0.0, 1.0));
  return Image(s.height, s.width, 1, std::move(px));
}

void save_spectrum_png(const Spectrum& s, const std::filesystem::path& path) {
  std::vector<double> mag(s.bins.size());
  double lo = 1e300, hi = -1e300;
  for (std::size_t i = 0; i < mag.size(); ++i) {
    mag[i] = std::log1p(std::abs(s.bins[i]));
    lo = std::min(lo, mag[i]);
    hi = std::max(hi, mag[i]);
  }
  const double range = hi > lo ? hi - lo : 1.0;
  std::vector<float> px(mag.size());
  for (std::size_t i = 0; i < mag.size(); ++i) px[i] = static_cast<float>((mag[i] - lo) / range);
  io::save_image(Image(s.height, s.width, 1, std::move(px)), path);
}

}  // namespace deepnotch::spectral
