#pragma once

#include <complex>
#include <filesystem>
#include <span>
#include <vector>

#include "deepnotch/io/image.hpp"

namespace deepnotch::spectral {

using Complex = std::complex<double>;

bool is_power_of_two(int n);
int next_power_of_two(int n);

// In-place iterative radix-2 transform. Forward is unnormalised; inverse
// scales by 1/n. Size must be a power of two.
void fft1d(std::span<Complex> data, bool inverse);

// Two-dimensional spectrum in DC-centred layout: bin (u, v) with u the
// horizontal and v the vertical frequency, u in [-W/2, W/2), v in [-H/2, H/2).
struct Spectrum {
  int height = 0;
  int width = 0;
  std::vector<Complex> bins;  // row (v + H/2), column (u + W/2)

  Complex& at(int u, int v) { return bins[index(u, v)]; }
  const Complex& at(int u, int v) const { return bins[index(u, v)]; }
  double magnitude(int u, int v) const { return std::abs(at(u, v)); }
  // Maps any integer frequency onto its representative in the stored range.
  int wrap_u(int u) const { return ((u + width / 2) % width + width) % width - width / 2; }
  int wrap_v(int v) const { return ((v + height / 2) % height + height) % height - height / 2; }
  std::size_t index(int u, int v) const {
    return static_cast<std::size_t>(wrap_v(v) + height / 2) * width + static_cast<std::size_t>(wrap_u(u) + width / 2);
  }
};

enum class PadMode {
  kNone,    // non-power-of-two sizes raise DimensionError
  kMirror,  // symmetric reflection up to the next power of two
};

// Rec. 601 luma of an RGB image; single-channel input is returned as is.
std::vector<float> luminance(const Image& img);

Spectrum fft2d(std::span<const float> plane, int height, int width, PadMode pad = PadMode::kNone);
// Analysis transform of the image luminance.
Spectrum fft2d(const Image& img, PadMode pad = PadMode::kNone);

// Real part of the inverse transform, row-major H*W, scaled by 1/(H*W).
std::vector<double> ifft2d(const Spectrum& spectrum);
// Single-channel image of the inverse transform, clamped to [0, 1].
Image ifft2d_image(const Spectrum& spectrum);

// Writes log(1 + |F|) rescaled to [0, 1] as an 8-bit grayscale PNG, DC at
// the centre.
void save_spectrum_png(const Spectrum& spectrum, const std::filesystem::path& path);

}  // namespace deepnotch::spectral
