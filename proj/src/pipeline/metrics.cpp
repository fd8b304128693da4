#include "deepnotch/pipeline/metrics.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "deepnotch/errors.hpp"
#include "deepnotch/spectral/fft.hpp"
#include "deepnotch/spectral/spikes.hpp"

namespace deepnotch::pipeline {

double psnr(const Image& a, const Image& b) {
  require_same_dims(a, b, "psnr");
  const auto pa = a.pixels(), pb = b.pixels();
  double s = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const double d = static_cast<double>(pa[i]) - pb[i];
    s += d * d;
  }
  const double mse = s / static_cast<double>(pa.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

namespace {

std::vector<double> gaussian_window() {
  std::vector<double> w(kSsimWindow);
  const int r = kSsimWindow / 2;
  double total = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    w[i] = std::exp(-0.5 * (i - r) * (i - r) / (kSsimSigma * kSsimSigma));
    total += w[i];
  }
  for (auto& v : w) v /= total;
  return w;
}

// Separable valid-mode filtering of an H x W plane.
std::vector<double> filter_valid(const std::vector<double>& src, int H, int W, const std::vector<double>& w) {
  const int k = static_cast<int>(w.size());
  const int oh = H - k + 1, ow = W - k + 1;
  std::vector<double> tmp(static_cast<std::size_t>(H) * ow, 0.0);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < k; ++i) s += w[i] * src[static_cast<std::size_t>(y) * W + x + i];
      tmp[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow, 0.0);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < k; ++i) s += w[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  return out;
}

}  // namespace

double ssim(const Image& a, const Image& b) {
  require_same_dims(a, b, "ssim");
  const int H = a.height(), W = a.width(), C = a.channels();
  if (H < kSsimWindow || W < kSsimWindow) {
    throw DimensionError("ssim: image " + std::to_string(H) + "x" + std::to_string(W) + " smaller than 11x11");
  }
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const auto w = gaussian_window();
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  double total = 0.0;
  for (int c = 0; c < C; ++c) {
    std::vector<double> x(plane), y(plane), xx(plane), yy(plane), xy(plane);
    for (std::size_t p = 0; p < plane; ++p) {
      x[p] = a.pixels()[p * C + c];
      y[p] = b.pixels()[p * C + c];
      xx[p] = x[p] * x[p];
      yy[p] = y[p] * y[p];
      xy[p] = x[p] * y[p];
    }
    const auto mx = filter_valid(x, H, W, w), my = filter_valid(y, H, W, w);
    const auto sxx = filter_valid(xx, H, W, w), syy = filter_valid(yy, H, W, w), sxy = filter_valid(xy, H, W, w);
    double s = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i];
      const double vy = syy[i] - my[i] * my[i];
      const double cov = sxy[i] - mx[i] * my[i];
      s += ((2 * mx[i] * my[i] + c1) * (2 * cov + c2)) /
           ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    total += s / static_cast<double>(mx.size());
  }
  return total / C;
}

double coss(const Image& a, const Image& b) {
  require_same_dims(a, b, "coss");
  double dot = 0.0, na = 0.0, nb = 0.0;
  const auto pa = a.pixels(), pb = b.pixels();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    dot += static_cast<double>(pa[i]) * pb[i];
    na += static_cast<double>(pa[i]) * pa[i];
    nb += static_cast<double>(pb[i]) * pb[i];
  }
  if (na == 0.0 || nb == 0.0) throw ContractError("coss: zero image vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

double spike_prominence_score(const Image& image) {
  const auto report = spectral::detect_spikes(spectral::fft2d(image), kScoreMinProminence);
  return report.spikes.empty() ? 1.0 : report.spikes.front().prominence;
}

}  // namespace deepnotch::pipeline
