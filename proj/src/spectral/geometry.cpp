#include "deepnotch/spectral/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "deepnotch/errors.hpp"
#include "deepnotch/spectral/fft.hpp"

namespace deepnotch::spectral {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

float bilinear_sample(const Image& img, double y, double x, int c, float fill, bool clamp_edges) {
  const int H = img.height(), W = img.width();
  if (!clamp_edges && (y < -0.5 || y > H - 0.5 || x < -0.5 || x > W - 0.5)) return fill;
  y = std::clamp(y, 0.0, static_cast<double>(H - 1));
  x = std::clamp(x, 0.0, static_cast<double>(W - 1));
  const int y0 = std::min(static_cast<int>(y), H - 1), x0 = std::min(static_cast<int>(x), W - 1);
  const int y1 = std::min(y0 + 1, H - 1), x1 = std::min(x0 + 1, W - 1);
  const double fy = y - y0, fx = x - x0;
  const double top = (1 - fx) * img.at(y0, x0, c) + fx * img.at(y0, x1, c);
  const double bot = (1 - fx) * img.at(y1, x0, c) + fx * img.at(y1, x1, c);
  return static_cast<float>((1 - fy) * top + fy * bot);
}

std::vector<float> hann_window(const std::vector<float>& plane, int H, int W) {
  std::vector<float> out(plane.size());
  double mean = 0;
  for (float v : plane) mean += v;
  mean /= static_cast<double>(plane.size());
  for (int y = 0; y < H; ++y) {
    const double wy = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * (y + 0.5) / H);
    for (int x = 0; x < W; ++x) {
      const double wx = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * (x + 0.5) / W);
      const std::size_t i = static_cast<std::size_t>(y) * W + x;
      out[i] = static_cast<float>((plane[i] - mean) * wy * wx);
    }
  }
  return out;
}

struct Analysis {
  Spectrum spectrum;
  SpikeReport report;
};

Analysis analyse(const Image& img, double min_prominence) {
  const auto windowed = hann_window(luminance(img), img.height(), img.width());
  Analysis a{fft2d(windowed, img.height(), img.width()), {}};
  a.report = detect_spikes(a.spectrum, min_prominence);
  return a;
}

// Sub-bin location of a spike from the magnitude-weighted 3 x 3 centroid.
Frequency refine(const Spectrum& s, const Spike& sp) {
  double wsum = 0, su = 0, sv = 0;
  for (int dv = -1; dv <= 1; ++dv) {
    for (int du = -1; du <= 1; ++du) {
      const double m = s.magnitude(sp.u + du, sp.v + dv);
      wsum += m;
      su += m * du;
      sv += m * dv;
    }
  }
  const double u = sp.u + su / wsum, v = sp.v + sv / wsum;
  return {u / s.width, v / s.height};
}

// Largest-magnitude detection. Ranking by prominence would favour
// grain-level peaks at high frequencies, where the log background is small.
const Spike& strongest(const SpikeReport& r) {
  return *std::max_element(r.spikes.begin(), r.spikes.end(),
                           [](const Spike& a, const Spike& b) { return a.magnitude < b.magnitude; });
}

const Spike* conjugate_of(const Spectrum& s, const SpikeReport& r, const Spike& sp) {
  for (const auto& o : r.spikes) {
    if (&o != &sp && s.index(o.u, o.v) == s.index(-sp.u, -sp.v)) return &o;
  }
  return nullptr;
}

}  // namespace

Image resize_bilinear(const Image& img, int height, int width) {
  Image out(height, width, img.channels());
  const double sy = static_cast<double>(img.height()) / height, sx = static_cast<double>(img.width()) / width;
  for (int y = 0; y < height; ++y) {
    const double src_y = (y + 0.5) * sy - 0.5;
    for (int x = 0; x < width; ++x) {
      const double src_x = (x + 0.5) * sx - 0.5;
      for (int c = 0; c < img.channels(); ++c) out.at(y, x, c) = bilinear_sample(img, src_y, src_x, c, 0.0f, true);
    }
  }
  return out;
}

Image rotate_bilinear(const Image& img, double angle_deg, float fill) {
  Image out(img.height(), img.width(), img.channels());
  const double cy = (img.height() - 1) / 2.0, cx = (img.width() - 1) / 2.0;
  const double c = std::cos(angle_deg * kDeg), s = std::sin(angle_deg * kDeg);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double dx = x - cx, dy = y - cy;
      // R(-angle) applied to (dx, dy).
      const double sx = c * dx + s * dy + cx;
      const double sy = -s * dx + c * dy + cy;
      for (int ch = 0; ch < img.channels(); ++ch) out.at(y, x, ch) = bilinear_sample(img, sy, sx, ch, fill, false);
    }
  }
  return out;
}

int valid_power_of_two_crop(int height, int width, double angle_deg) {
  const double a = std::fabs(std::fmod(angle_deg, 90.0)) * kDeg;
  const double side = std::min(height, width) / (std::cos(a) + std::sin(a));
  int p = 1;
  while (p * 2 <= side + 1e-9) p *= 2;
  return p;
}

Image center_crop(const Image& img, int height, int width) {
  if (height > img.height() || width > img.width()) throw DimensionError("center_crop: crop larger than image");
  const int oy = (img.height() - height) / 2, ox = (img.width() - width) / 2;
  Image out(height, width, img.channels());
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < img.channels(); ++c) out.at(y, x, c) = img.at(y + oy, x + ox, c);
  return out;
}

double Frequency::angle_deg() const {
  double a = std::atan2(fy, fx) / kDeg;
  a = std::fmod(a, 180.0);
  if (a < 0) a += 180.0;
  return a;
}

double Frequency::radius() const { return std::hypot(fx, fy); }

double ShiftResult::angle_error_deg() const {
  double d = std::fabs(measured.angle_deg() - predicted.angle_deg());
  return std::min(d, 180.0 - d);
}

double ShiftResult::radius_error_bins() const {
  return std::fabs(measured.radius() - predicted.radius()) * analysed_size;
}

ShiftResult geometric_spectrum_shift(const Image& image, double scale, double angle_deg, double min_prominence) {
  if (!(scale > 0.0)) throw ContractError("geometric_spectrum_shift: scale must be positive");
  ShiftResult r;
  Analysis src = analyse(image, min_prominence);
  if (src.report.spikes.empty()) throw DataError("geometric_spectrum_shift: no spikes detected in the source image");
  // Canonical half-plane representative of the strongest pair.
  const Spike* top = &strongest(src.report);
  if (const Spike* mate = conjugate_of(src.spectrum, src.report, *top);
      mate && (top->v < 0 || (top->v == 0 && top->u < 0))) {
    top = mate;
  }
  r.source = refine(src.spectrum, *top);
  r.source_bin_u = top->u;
  r.source_bin_v = top->v;
  r.source_report = std::move(src.report);

  const int H = static_cast<int>(std::lround(image.height() * scale));
  const int W = static_cast<int>(std::lround(image.width() * scale));
  Image t = (H == image.height() && W == image.width()) ? image : resize_bilinear(image, H, W);
  if (angle_deg != 0.0) {
    double mean = 0;
    for (float v : t.pixels()) mean += v;
    t = rotate_bilinear(t, angle_deg, static_cast<float>(mean / static_cast<double>(t.size())));
  }
  const int side = valid_power_of_two_crop(H, W, angle_deg);
  if (side < Image::kMinSide) throw DimensionError("geometric_spectrum_shift: transformed image too small");
  const Image crop = (side == H && side == W) ? t : center_crop(t, side, side);
  r.analysed_size = side;

  const double c = std::cos(angle_deg * kDeg), s = std::sin(angle_deg * kDeg);
  r.predicted = {(c * r.source.fx - s * r.source.fy) / scale, (s * r.source.fx + c * r.source.fy) / scale};

  Analysis dst = analyse(crop, min_prominence);
  if (dst.report.spikes.empty()) throw DataError("geometric_spectrum_shift: no spikes detected after the transform");
  // Of the strongest pair, the member nearest the prediction.
  const Spike* pick = &strongest(dst.report);
  if (const Spike* mate = conjugate_of(dst.spectrum, dst.report, *pick)) {
    auto dist = [&](const Spike& sp) {
      const double dx = static_cast<double>(sp.u) / side - r.predicted.fx;
      const double dy = static_cast<double>(sp.v) / side - r.predicted.fy;
      return dx * dx + dy * dy;
    };
    if (dist(*mate) < dist(*pick)) pick = mate;
  }
  const Spike& m = *pick;
  r.measured = refine(dst.spectrum, m);
  r.measured_bin_u = m.u;
  r.measured_bin_v = m.v;
  r.measured_report = std::move(dst.report);
  return r;
}

}  // namespace deepnotch::spectral
