#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "deepnotch/io/dataset.hpp"
#include "deepnotch/io/image.hpp"

namespace deepnotch::synth {

enum class ArtifactKind { kCheckerboard, kSinusoid };

const char* artifact_kind_name(ArtifactKind kind);
ArtifactKind parse_artifact_kind(const std::string& name);

struct ArtifactConfig {
  ArtifactKind kind = ArtifactKind::kCheckerboard;
  // checkerboard
  int stride = 2;
  int kernel = 3;
  double gain = 0.5;
  // sinusoid
  int freq_u = 8;
  int freq_v = 0;
  double amplitude = 0.1;
  double phase = 0.0;

  // Throws ContractError for kernel % stride == 0, gain outside [0, 1],
  // non-positive stride/kernel or amplitude outside [0, 0.5].
  void validate() const;
};

struct TextureParams {
  int channels = 3;
  // Per-image grain standard deviation is drawn uniformly from this range.
  double grain_min = 0.010;
  double grain_max = 0.020;
};

// Tileable content of a procedural "real" image: a periodic low-frequency
// gradient, Gaussian blobs, soft-edged discs and circularly blurred noise.
Image procedural_content(int size, std::uint64_t seed, const TextureParams& params = {});
// Adds white Gaussian grain with the per-image sigma drawn from `params`
// using `seed`, then clamps.
Image add_grain(const Image& content, std::uint64_t seed, const TextureParams& params = {});
// procedural_content followed by add_grain with the same seed.
Image procedural_real(int size, std::uint64_t seed, const TextureParams& params = {});

// out = clamp(in + amplitude * cos(2 pi (u x / W + v y / H) + phase)).
Image inject_sinusoid(const Image& image, int u, int v, double amplitude, double phase);

// Per-channel transposed-convolution kernel of the synthetic generator: a
// bilinear interpolation kernel perturbed by seeded positive noise,
// normalised to sum stride^2. Returned as [C, C, k, k] with zero
// cross-channel taps.
nn::Tensor generator_kernel(int channels, int stride, int kernel, std::uint64_t seed);

// Average-pool by stride, upsample with the seeded transposed convolution
// (output folded circularly so the pattern is exactly periodic), then
// fake = clamp((1 - gain) * real + gain * upsampled).
Image checkerboard_fake(const Image& real, const ArtifactConfig& cfg, std::uint64_t seed);

// Applies cfg to one image; the seed selects the generator kernel.
Image make_fake(const Image& real, const ArtifactConfig& cfg, std::uint64_t seed);

struct DatasetOptions {
  int count = 1;
  int size = 64;
  ArtifactConfig artifact;
  TextureParams texture;
  std::uint64_t seed = 1;
  bool overwrite = false;
  int threads = 1;
};

// Writes <out>/real, <out>/fake and <out>/manifest.csv. The artifact is
// synthesised from the grain-free content and the same grain realisation is
// added to both members of a pair, so the artifact is the only systematic
// difference. Refuses a non-empty out_dir unless overwrite is set.
io::PairedDataset generate_dataset(const DatasetOptions& opts, const std::filesystem::path& out_dir);

// The in-memory pair generate_dataset writes for index i.
io::ImagePair synthesize_pair(const DatasetOptions& opts, std::size_t index);

std::string pair_filename(std::size_t index);

}  // namespace deepnotch::synth
