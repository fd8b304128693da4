#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "deepnotch/io/checkpoint.hpp"
#include "deepnotch/io/dataset.hpp"
#include "deepnotch/io/image.hpp"
#include "deepnotch/nn/layers.hpp"

namespace deepnotch::adversary {

inline constexpr int kLabelReal = 0;
inline constexpr int kLabelFake = 1;

struct DetectorOptions {
  std::array<int, 4> widths{16, 32, 64, 64};
};

// Four conv3x3 + ReLU + 2x2 max-pool blocks, global average pool and a
// 1x1 conv to two logits (real = 0, fake = 1).
class DetectorModel {
 public:
  DetectorModel(const DetectorOptions& options, std::uint64_t seed);

  const DetectorOptions& options() const { return options_; }
  // [N, 3, H, W] -> [N, 2] logits. H and W must be divisible by 16.
  nn::Var forward(const nn::Var& x) const;
  std::array<double, 2> probabilities(const Image& image) const;
  // Argmax labels, evaluated in batches.
  std::vector<int> classify(const std::vector<Image>& images) const;

  const nn::NamedParams& parameters() const { return params_; }
  std::size_t parameter_count() const { return nn::parameter_count(params_); }
  // Deep copy whose parameters do not require gradients; input gradients
  // can then be taken concurrently from several threads.
  DetectorModel frozen() const;

  io::Checkpoint to_checkpoint() const;
  static DetectorModel from_checkpoint(const io::Checkpoint& ckpt);
  void save(const std::filesystem::path& path) const;
  static DetectorModel load(const std::filesystem::path& path);

 private:
  DetectorOptions options_;
  std::array<nn::Conv2d, 4> blocks_;
  nn::Conv2d head_;
  nn::NamedParams params_;

  void collect_params();
};

struct TrainDetectorOptions {
  int epochs = 10;
  int batch = 16;
  float learning_rate = 3e-3f;
  std::uint64_t seed = 1;
  double holdout = 0.2;
  DetectorOptions model;
  std::function<void(int, double)> on_epoch;  // (epoch, mean loss)
};

struct TrainDetectorResult {
  DetectorModel model;
  double heldout_accuracy = 0.0;
  std::size_t heldout_count = 0;
  std::vector<double> epoch_loss;
};

// Cross-entropy training on labelled images (all of them).
TrainDetectorResult train_detector(const std::vector<Image>& images, const std::vector<int>& labels,
                                   const TrainDetectorOptions& options);

// Splits pairs (not images) 80/20 with a seeded shuffle, trains on both
// members of the training pairs and reports accuracy on the held-out ones.
TrainDetectorResult train_subject_detector(const std::vector<io::ImagePair>& pairs,
                                           const TrainDetectorOptions& options);

// Held-out split used by train_subject_detector: indices of held-out pairs.
std::vector<std::size_t> heldout_pairs(std::size_t pair_count, double holdout, std::uint64_t seed);

double accuracy(const DetectorModel& model, const std::vector<Image>& images, const std::vector<int>& labels);

}  // namespace deepnotch::adversary
