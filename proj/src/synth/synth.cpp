#include "deepnotch/synth/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "deepnotch/errors.hpp"
#include "deepnotch/io/png.hpp"
#include "deepnotch/nn/ops.hpp"
#include "deepnotch/nn/rng.hpp"
#include "deepnotch/parallel.hpp"
#include "deepnotch/spectral/fft.hpp"

namespace deepnotch::synth {

namespace fs = std::filesystem;
using nn::Rng;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Strength of the random perturbation added to the bilinear taps of the
// generator kernel; sets the depth of the checkerboard modulation.
constexpr double kKernelJitter = 0.2;

constexpr int kMinDiscs = 3;
constexpr int kMaxDiscs = 8;
constexpr double kDiscAmpMin = 0.08;
constexpr double kDiscAmpMax = 0.25;
// Band-limited texture: per-image std and blur radius ranges.
constexpr double kTexMin = 0.08;
constexpr double kTexMax = 0.15;
constexpr double kBlurMin = 1.0;
constexpr double kBlurMax = 2.0;

// Sub-streams of a per-image seed.
enum Stream : std::uint64_t { kContent = 1, kGrain = 2, kKernel = 3 };

// Separable Gaussian blur with wrap-around borders.
std::vector<float> circular_blur(const std::vector<float>& plane, int H, int W, double sigma) {
  const int r = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * r + 1);
  double ks = 0;
  for (int i = -r; i <= r; ++i) ks += k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& v : k) v /= ks;
  std::vector<float> tmp(plane.size()), out(plane.size());
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      double s = 0;
      for (int i = -r; i <= r; ++i) s += k[i + r] * plane[static_cast<std::size_t>(y) * W + ((x + i) % W + W) % W];
      tmp[static_cast<std::size_t>(y) * W + x] = static_cast<float>(s);
    }
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      double s = 0;
      for (int i = -r; i <= r; ++i) s += k[i + r] * tmp[static_cast<std::size_t>(((y + i) % H + H) % H) * W + x];
      out[static_cast<std::size_t>(y) * W + x] = static_cast<float>(s);
    }
  return out;
}

double wrapped_delta(double a, double b, int n) {
  double d = std::fabs(a - b);
  return std::min(d, n - d);
}

}  // namespace

const char* artifact_kind_name(ArtifactKind kind) {
  return kind == ArtifactKind::kCheckerboard ? "checkerboard" : "sinusoid";
}

ArtifactKind parse_artifact_kind(const std::string& name) {
  if (name == "checkerboard") return ArtifactKind::kCheckerboard;
  if (name == "sinusoid") return ArtifactKind::kSinusoid;
  throw ConfigError("unknown artifact kind '" + name + "' (expected checkerboard or sinusoid)");
}

void ArtifactConfig::validate() const {
  if (kind == ArtifactKind::kCheckerboard) {
    if (stride < 1 || kernel < 1) throw ContractError("checkerboard stride and kernel must be positive");
    if (kernel % stride == 0) {
      throw ContractError("checkerboard kernel " + std::to_string(kernel) + " is divisible by stride " +
                          std::to_string(stride) + " (no uneven overlap)");
    }
    if (!(gain >= 0.0 && gain <= 1.0)) throw ContractError("checkerboard gain must lie in [0, 1]");
  } else {
    if (!(amplitude >= 0.0 && amplitude <= 0.5)) throw ContractError("sinusoid amplitude must lie in [0, 0.5]");
  }
}

Image procedural_content(int size, std::uint64_t seed, const TextureParams& params) {
  if (!spectral::is_power_of_two(size) || size < Image::kMinSide) {
    throw DimensionError("texture size " + std::to_string(size) + " must be a power of two >= 8");
  }
  const int C = params.channels;
  Rng rng(nn::derive_seed(seed, kContent));
  const int N = size;
  std::vector<std::vector<float>> planes(C, std::vector<float>(static_cast<std::size_t>(N) * N));

  double base[3];
  for (double& b : base) b = rng.uniform(0.35, 0.65);
  // Periodic low-frequency gradient.
  const int kx = static_cast<int>(rng.below(3)) - 1;
  const int ky = kx == 0 ? 1 : static_cast<int>(rng.below(3)) - 1;
  const double gphase = rng.uniform(0.0, kTwoPi);
  double gcol[3];
  const double gamp = rng.uniform(0.05, 0.15);
  for (double& g : gcol) g = gamp * rng.uniform(0.6, 1.0);

  struct Blob {
    double cx, cy, sigma, amp[3];
  };
  std::vector<Blob> blobs(4 + rng.below(5));
  for (auto& b : blobs) {
    b.cx = rng.uniform(0.0, N);
    b.cy = rng.uniform(0.0, N);
    b.sigma = rng.uniform(N / 16.0, N / 5.0);
    const double a = rng.uniform(0.05, 0.18) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    for (double& c : b.amp) c = a * rng.uniform(0.5, 1.0);
  }

  // Flat-shaded discs with a one-pixel soft edge.
  struct Disc {
    double cx, cy, radius, amp[3];
  };
  std::vector<Disc> discs(kMinDiscs + rng.below(kMaxDiscs - kMinDiscs + 1));
  for (auto& d : discs) {
    d.cx = rng.uniform(0.0, N);
    d.cy = rng.uniform(0.0, N);
    d.radius = rng.uniform(N / 16.0, N / 5.0);
    const double a = rng.uniform(kDiscAmpMin, kDiscAmpMax) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    for (double& c : d.amp) c = a * rng.uniform(0.6, 1.0);
  }

  // Band-limited noise shared across channels with a small chroma part.
  const double blur = rng.uniform(kBlurMin, kBlurMax);
  const double tex_std = rng.uniform(kTexMin, kTexMax);
  std::vector<float> white(static_cast<std::size_t>(N) * N);
  for (auto& w : white) w = static_cast<float>(rng.normal());
  auto shared = circular_blur(white, N, N, blur);
  double var = 0;
  for (float v : shared) var += static_cast<double>(v) * v;
  const double shared_scale = tex_std / std::sqrt(var / static_cast<double>(shared.size()));

  for (int c = 0; c < C; ++c) {
    for (auto& w : white) w = static_cast<float>(rng.normal());
    auto chroma = circular_blur(white, N, N, blur);
    auto& p = planes[c];
    for (int y = 0; y < N; ++y) {
      for (int x = 0; x < N; ++x) {
        double v = base[c] + gcol[c] * std::cos(kTwoPi * (kx * x + ky * y) / N + gphase);
        for (const auto& b : blobs) {
          const double dx = wrapped_delta(x, b.cx, N), dy = wrapped_delta(y, b.cy, N);
          v += b.amp[c] * std::exp(-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma));
        }
        for (const auto& d : discs) {
          const double dx = wrapped_delta(x, d.cx, N), dy = wrapped_delta(y, d.cy, N);
          const double edge = std::clamp(d.radius - std::sqrt(dx * dx + dy * dy) + 0.5, 0.0, 1.0);
          v += d.amp[c] * edge;
        }
        const std::size_t i = static_cast<std::size_t>(y) * N + x;
        v += shared_scale * (shared[i] + 0.3 * chroma[i]);
        p[i] = static_cast<float>(v);
      }
    }
  }
  Image img(N, N, C);
  for (int c = 0; c < C; ++c) img.set_channel(c, planes[c]);
  img.clamp();
  return img;
}

Image add_grain(const Image& content, std::uint64_t seed, const TextureParams& params) {
  Rng rng(nn::derive_seed(seed, kGrain));
  const double sigma = rng.uniform(params.grain_min, params.grain_max);
  Image out = content;
  for (auto& v : out.pixels()) v += static_cast<float>(sigma * rng.normal());
  out.clamp();
  return out;
}

Image procedural_real(int size, std::uint64_t seed, const TextureParams& params) {
  return add_grain(procedural_content(size, seed, params), seed, params);
}

Image inject_sinusoid(const Image& image, int u, int v, double amplitude, double phase) {
  const int H = image.height(), W = image.width();
  if (std::abs(u) > W / 2 || std::abs(v) > H / 2) {
    throw ContractError("sinusoid frequency (" + std::to_string(u) + "," + std::to_string(v) +
                        ") is beyond the Nyquist range");
  }
  if (!(amplitude >= 0.0 && amplitude <= 0.5)) throw ContractError("sinusoid amplitude must lie in [0, 0.5]");
  Image out = image;
  if (amplitude == 0.0) return out;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const double s = amplitude * std::cos(kTwoPi * (static_cast<double>(u) * x / W + static_cast<double>(v) * y / H) + phase);
      for (int c = 0; c < image.channels(); ++c) out.at(y, x, c) += static_cast<float>(s);
    }
  }
  out.clamp();
  return out;
}

nn::Tensor generator_kernel(int channels, int stride, int kernel, std::uint64_t seed) {
  Rng rng(nn::derive_seed(seed, kKernel));
  nn::Tensor w({channels, channels, kernel, kernel});
  const double centre = (kernel - 1) / 2.0;
  for (int c = 0; c < channels; ++c) {
    std::vector<double> taps(static_cast<std::size_t>(kernel) * kernel);
    double sum = 0;
    for (int i = 0; i < kernel; ++i) {
      for (int j = 0; j < kernel; ++j) {
        const double bi = std::max(0.0, 1.0 - std::fabs(i - centre) / stride);
        const double bj = std::max(0.0, 1.0 - std::fabs(j - centre) / stride);
        const double t = bi * bj + kKernelJitter * rng.uniform();
        taps[static_cast<std::size_t>(i) * kernel + j] = t;
        sum += t;
      }
    }
    const double norm = static_cast<double>(stride) * stride / sum;
    for (int i = 0; i < kernel; ++i)
      for (int j = 0; j < kernel; ++j) w.at(c, c, i, j) = static_cast<float>(taps[static_cast<std::size_t>(i) * kernel + j] * norm);
  }
  return w;
}

Image checkerboard_fake(const Image& real, const ArtifactConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const int s = cfg.stride, k = cfg.kernel;
  const int H = real.height(), W = real.width(), C = real.channels();
  if (H % s != 0 || W % s != 0) {
    throw DimensionError("checkerboard_fake: " + std::to_string(H) + "x" + std::to_string(W) +
                         " is not divisible by stride " + std::to_string(s));
  }
  if (cfg.gain == 0.0) return real;
  const int h = H / s, w = W / s;
  nn::Tensor low({1, C, h, w});
  const float inv = 1.0f / static_cast<float>(s * s);
  for (int c = 0; c < C; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        float acc = 0;
        for (int i = 0; i < s; ++i)
          for (int j = 0; j < s; ++j) acc += real.at(y * s + i, x * s + j, c);
        low.at(0, c, y, x) = acc * inv;
      }
  const nn::Tensor up = nn::transposed_conv2d(low, generator_kernel(C, s, k, seed), s);
  // Fold the (h-1)s+k output onto the H x W torus, kernel centred on the
  // source pixel.
  const int off = (k - 1) / 2;
  std::vector<float> folded(static_cast<std::size_t>(C) * H * W, 0.0f);
  for (int c = 0; c < C; ++c)
    for (int y = 0; y < up.dim(2); ++y)
      for (int x = 0; x < up.dim(3); ++x) {
        const int ty = ((y - off) % H + H) % H, tx = ((x - off) % W + W) % W;
        folded[(static_cast<std::size_t>(c) * H + ty) * W + tx] += up.at(0, c, y, x);
      }
  Image fake = real;
  const float g = static_cast<float>(cfg.gain);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      for (int c = 0; c < C; ++c) {
        fake.at(y, x, c) = (1.0f - g) * real.at(y, x, c) + g * folded[(static_cast<std::size_t>(c) * H + y) * W + x];
      }
  fake.clamp();
  return fake;
}

Image make_fake(const Image& real, const ArtifactConfig& cfg, std::uint64_t seed) {
  if (cfg.kind == ArtifactKind::kCheckerboard) return checkerboard_fake(real, cfg, seed);
  cfg.validate();
  return inject_sinusoid(real, cfg.freq_u, cfg.freq_v, cfg.amplitude, cfg.phase);
}

std::string pair_filename(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "pair_%05zu.png", index);
  return buf;
}

io::ImagePair synthesize_pair(const DatasetOptions& opts, std::size_t index) {
  const std::uint64_t item_seed = nn::derive_seed(opts.seed, index);
  const Image content = procedural_content(opts.size, item_seed, opts.texture);
  const Image fake_content = make_fake(content, opts.artifact, opts.seed);
  return {add_grain(content, item_seed, opts.texture), add_grain(fake_content, item_seed, opts.texture)};
}

io::PairedDataset generate_dataset(const DatasetOptions& opts, const fs::path& out_dir) {
  if (opts.count < 1) throw ContractError("generate_dataset: count must be at least 1");
  if (!spectral::is_power_of_two(opts.size) || opts.size < 64 || opts.size > 256) {
    throw DimensionError("generate_dataset: size must be a power of two in [64, 256]");
  }
  opts.artifact.validate();
  if (fs::exists(out_dir) && !fs::is_empty(out_dir)) {
    if (!opts.overwrite) throw IoError("output directory " + out_dir.string() + " is not empty (use overwrite)");
    fs::remove_all(out_dir / "real");
    fs::remove_all(out_dir / "fake");
    fs::remove(out_dir / "manifest.csv");
  }
  fs::create_directories(out_dir / "real");
  fs::create_directories(out_dir / "fake");

  std::vector<io::ManifestRow> rows(static_cast<std::size_t>(opts.count));
  const bool cb = opts.artifact.kind == ArtifactKind::kCheckerboard;
  parallel_for(rows.size(), opts.threads, [&](std::size_t i) {
    const auto pair = synthesize_pair(opts, i);
    const std::string name = pair_filename(i);
    io::save_image(pair.real, out_dir / "real" / name);
    io::save_image(pair.fake, out_dir / "fake" / name);
    rows[i] = {name, artifact_kind_name(opts.artifact.kind), cb ? opts.artifact.stride : 0,
               cb ? opts.artifact.kernel : 0, cb ? opts.artifact.gain : opts.artifact.amplitude, opts.seed};
  });
  io::write_manifest(rows, out_dir / "manifest.csv");
  return io::PairedDataset::open(out_dir);
}

}  // namespace deepnotch::synth
