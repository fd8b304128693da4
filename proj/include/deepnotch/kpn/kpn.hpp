#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "deepnotch/adversary/guidance.hpp"
#include "deepnotch/io/checkpoint.hpp"
#include "deepnotch/io/dataset.hpp"
#include "deepnotch/io/image.hpp"
#include "deepnotch/nn/layers.hpp"
#include "deepnotch/nn/rng.hpp"

namespace deepnotch::kpn {

// Per-pixel K x K kernels shared by all channels. weights is [1, K*K, H, W];
// tap t runs row-major over the window, so the centre tap is K*K / 2.
struct KernelField {
  int kernel_size = 3;
  nn::Tensor weights;

  int height() const { return weights.dim(2); }
  int width() const { return weights.dim(3); }
  float at(int y, int x, int tap) const { return weights.at(0, tap, y, x); }

  // Largest |sum of a kernel - 1| over all pixels.
  double max_normalization_error() const;
  // Mean total-variation distance to the centre delta.
  double mean_delta_distance() const;

  static KernelField identity(int height, int width, int kernel_size);
};

// Replicate-border per-pixel filtering, identical across channels, clamped
// to [0, 1]. Throws ContractError on size mismatch or unnormalized kernels.
Image pixelwise_filter(const Image& image, const KernelField& kernels);

enum class NoiseFamily { kGaussian, kUniform };

const char* noise_family_name(NoiseFamily f);
NoiseFamily parse_noise_family(const std::string& name);

// Amplitudes in 8-bit units. With area < 1 the whole noise field is scaled by
// 1 / area so the L1 energy over the image stays constant.
struct NoiseSpec {
  NoiseFamily family = NoiseFamily::kGaussian;
  double mean = 0.0;
  double sigma = 10.0;
  double lower = -20.0;
  double upper = 20.0;
  double area = 1.0;

  static NoiseSpec gaussian(double sigma, double mean = 0.0);
  static NoiseSpec uniform(double lower, double upper);

  // Throws ConfigError for sigma < 0, lower >= upper or area outside (0, 1].
  void validate() const;
  double amplitude_scale() const { return 1.0 / area; }
  // Expected mean |N| per value in unit-interval scale (before masking).
  double expected_l1() const;
  // One value per pixel and channel, unit-interval scale.
  std::vector<float> sample(std::size_t count, nn::Rng& rng) const;
};

struct KpnOptions {
  int kernel_size = 3;
  int base_width = 16;
};

// Three-scale encoder/decoder: two conv3x3+ReLU per scale, 2x average-pool
// down, bilinear 2x up with skip concatenation, 1x1 head to K*K channels.
class KpnModel {
 public:
  KpnModel(const KpnOptions& options, std::uint64_t seed);

  const KpnOptions& options() const { return options_; }
  // Raw K*K-channel logits for an [N, 3, H, W] batch.
  nn::Var forward(const nn::Var& x) const;
  // Softmax-normalised kernels. H and W must be divisible by 4.
  nn::Var kernels(const nn::Var& x) const;
  KernelField predict_kernels(const Image& image) const;

  const nn::NamedParams& parameters() const { return params_; }
  std::size_t parameter_count() const { return nn::parameter_count(params_); }

  io::Checkpoint to_checkpoint() const;
  static KpnModel from_checkpoint(const io::Checkpoint& ckpt);
  void save(const std::filesystem::path& path) const;
  static KpnModel load(const std::filesystem::path& path);

 private:
  KpnOptions options_;
  nn::Conv2d e1a_, e1b_, e2a_, e2b_, e3a_, e3b_, d2a_, d2b_, d1a_, d1b_, head_;
  nn::NamedParams params_;
};

KernelField kpn_predict_kernels(const KpnModel& model, const Image& image);

struct TrainKpnOptions {
  int epochs = 4;
  int batch = 4;
  float learning_rate = 1e-3f;
  std::uint64_t seed = 1;
  KpnOptions model;
  // Called after every step with (step, loss); optional.
  std::function<void(std::int64_t, double)> on_step;
};

struct TrainKpnResult {
  KpnModel model;
  std::vector<double> loss_curve;   // per step
  std::vector<double> epoch_loss;   // mean per epoch
};

// Minimises L1(filter(fake + N, kernels(fake + N)), real) with fresh noise
// every step. Throws NumericError naming the step on a non-finite loss.
TrainKpnResult train_kpn(const std::vector<io::ImagePair>& pairs, const NoiseSpec& noise,
                         const TrainKpnOptions& options);

// A * N (or N without guidance) as drawn by add_noise for this seed, before
// clamping. Interleaved like Image pixels.
std::vector<float> noise_field(const Image& like, const NoiseSpec& noise, const adversary::GuidanceMap* guidance,
                               std::uint64_t seed);

// clamp(fake + A * N), or clamp(fake + N) without guidance.
Image add_noise(const Image& fake, const NoiseSpec& noise, const adversary::GuidanceMap* guidance,
                std::uint64_t seed);

// Noise (optionally guided), then one pixel-wise filtering pass with kernels
// predicted from the noised image.
Image deepnotch_reconstruct(const KpnModel& model, const Image& fake, const NoiseSpec& noise,
                            const adversary::GuidanceMap* guidance, std::uint64_t seed);

// Same computation kept on the tape; the returned Var is the filter output.
nn::Var reconstruct_graph(const KpnModel& model, const Image& noised);

}  // namespace deepnotch::kpn
