#include "deepnotch/adversary/detector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "deepnotch/errors.hpp"
#include "deepnotch/nn/ops.hpp"
#include "deepnotch/nn/optim.hpp"

namespace deepnotch::adversary {

using nn::Var;

namespace {

constexpr std::size_t kEvalBatch = 32;

}  // namespace

DetectorModel::DetectorModel(const DetectorOptions& options, std::uint64_t seed) : options_(options) {
  nn::Rng rng(seed);
  int in = 3;
  for (int b = 0; b < 4; ++b) {
    if (options.widths[b] < 1) throw ConfigError("detector: widths must be positive");
    blocks_[b] = nn::make_conv(in, options.widths[b], 3, rng);
    in = options.widths[b];
  }
  head_ = nn::make_conv(in, 2, 1, rng);
  // Bias offsets so the first layer sees mid-grey as zero at init.
  {
    const auto& w = blocks_[0].weight.value();
    const std::size_t fan = w.numel() / options.widths[0];
    for (int o = 0; o < options.widths[0]; ++o) {
      double s = 0.0;
      for (std::size_t i = 0; i < fan; ++i) s += w[o * fan + i];
      blocks_[0].bias.mutable_value()[o] = static_cast<float>(-0.5 * s);
    }
  }
  collect_params();
}

void DetectorModel::collect_params() {
  params_.clear();
  for (int b = 0; b < 4; ++b) nn::collect(params_, "block" + std::to_string(b + 1), blocks_[b]);
  nn::collect(params_, "head", head_);
}

DetectorModel DetectorModel::frozen() const {
  DetectorModel m = *this;
  auto freeze = [](nn::Conv2d& c) {
    c.weight = Var::leaf(c.weight.value(), false);
    c.bias = Var::leaf(c.bias.value(), false);
  };
  for (auto& b : m.blocks_) freeze(b);
  freeze(m.head_);
  m.collect_params();
  return m;
}

Var DetectorModel::forward(const Var& x) const {
  const auto& s = x.shape();
  if (s.size() != 4 || s[1] != 3) throw DimensionError("detector: expected [N, 3, H, W], got " + nn::shape_str(s));
  if (s[2] % 16 != 0 || s[3] % 16 != 0) {
    throw DimensionError("detector: image dims " + std::to_string(s[2]) + "x" + std::to_string(s[3]) +
                         " must be divisible by 16");
  }
  Var h = x;
  for (const auto& conv : blocks_) h = nn::max_pool2d(nn::relu(conv(h)), 2);
  return head_(nn::global_avg_pool(h));
}

std::array<double, 2> DetectorModel::probabilities(const Image& image) const {
  nn::NoGradGuard guard;
  const auto& l = forward(Var::leaf(image_to_tensor(image))).value();
  const double m = std::max(l[0], l[1]);
  const double a = std::exp(l[0] - m), b = std::exp(l[1] - m);
  return {a / (a + b), b / (a + b)};
}

std::vector<int> DetectorModel::classify(const std::vector<Image>& images) const {
  nn::NoGradGuard guard;
  std::vector<int> out;
  out.reserve(images.size());
  for (std::size_t start = 0; start < images.size(); start += kEvalBatch) {
    const std::size_t end = std::min(images.size(), start + kEvalBatch);
    const auto logits = forward(Var::leaf(images_to_tensor(std::span(images).subspan(start, end - start)))).value();
    for (std::size_t i = 0; i < end - start; ++i) out.push_back(logits[2 * i + 1] > logits[2 * i] ? 1 : 0);
  }
  return out;
}

io::Checkpoint DetectorModel::to_checkpoint() const {
  io::Checkpoint c;
  c.kind = io::ModelKind::kDetector;
  for (int b = 0; b < 4; ++b) c.metadata.emplace_back("width" + std::to_string(b + 1), options_.widths[b]);
  for (const auto& [name, var] : params_) c.tensors.push_back({name, var.value()});
  return c;
}

DetectorModel DetectorModel::from_checkpoint(const io::Checkpoint& ckpt) {
  if (ckpt.kind != io::ModelKind::kDetector) {
    throw CheckpointError(CheckpointError::Reason::kUnknownKind,
                          std::string("expected a detector checkpoint, got ") + io::model_kind_name(ckpt.kind));
  }
  DetectorOptions o;
  for (int b = 0; b < 4; ++b) o.widths[b] = static_cast<int>(ckpt.meta("width" + std::to_string(b + 1)));
  DetectorModel m(o, 0);
  io::assign_parameters(ckpt, io::ModelKind::kDetector, m.params_);
  return m;
}

void DetectorModel::save(const std::filesystem::path& path) const { io::save_checkpoint(to_checkpoint(), path); }

DetectorModel DetectorModel::load(const std::filesystem::path& path) {
  return from_checkpoint(io::load_checkpoint(path));
}

double accuracy(const DetectorModel& model, const std::vector<Image>& images, const std::vector<int>& labels) {
  if (images.empty() || images.size() != labels.size()) throw ContractError("accuracy: bad image/label counts");
  const auto pred = model.classify(images);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == labels[i];
  return static_cast<double>(correct) / static_cast<double>(pred.size());
}

TrainDetectorResult train_detector(const std::vector<Image>& images, const std::vector<int>& labels,
                                   const TrainDetectorOptions& options) {
  if (images.empty() || images.size() != labels.size()) throw DataError("train_detector: bad image/label counts");
  if (options.epochs < 1 || options.batch < 1) throw ConfigError("train_detector: epochs and batch must be >= 1");
  const bool has_real = std::count(labels.begin(), labels.end(), kLabelReal) > 0;
  const bool has_fake = std::count(labels.begin(), labels.end(), kLabelFake) > 0;
  if (!has_real || !has_fake) throw DataError("train_detector: dataset must contain both real and fake images");

  nn::Rng rng(nn::derive_seed(options.seed, 0));
  TrainDetectorResult result{DetectorModel(options.model, nn::derive_seed(options.seed, 1)), 0.0, 0, {}};
  nn::Adam adam(nn::vars_of(result.model.parameters()), options.learning_rate);
  std::vector<std::size_t> order(images.size());
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double total = 0.0;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < order.size(); start += options.batch) {
      const std::size_t end = std::min(order.size(), start + options.batch);
      std::vector<Image> batch;
      std::vector<int> y;
      for (std::size_t j = start; j < end; ++j) {
        batch.push_back(images[order[j]]);
        y.push_back(labels[order[j]]);
      }
      Var loss = nn::cross_entropy(result.model.forward(Var::leaf(images_to_tensor(batch))), y);
      const double l = loss.value()[0];
      if (!std::isfinite(l)) {
        throw NumericError("train_detector: non-finite loss in epoch " + std::to_string(epoch) + " at batch " +
                           std::to_string(steps));
      }
      adam.zero_grad();
      loss.backward();
      adam.step();
      total += l;
      ++steps;
    }
    result.epoch_loss.push_back(total / static_cast<double>(steps));
    if (options.on_epoch) options.on_epoch(epoch, result.epoch_loss.back());
  }
  return result;
}

std::vector<std::size_t> heldout_pairs(std::size_t pair_count, double holdout, std::uint64_t seed) {
  if (!(holdout > 0.0 && holdout < 1.0)) throw ConfigError("holdout fraction must lie in (0, 1)");
  std::vector<std::size_t> order(pair_count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  nn::Rng rng(nn::derive_seed(seed, 2));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  const auto n = static_cast<std::size_t>(std::lround(holdout * static_cast<double>(pair_count)));
  order.resize(std::min(n, pair_count));
  std::sort(order.begin(), order.end());
  return order;
}

TrainDetectorResult train_subject_detector(const std::vector<io::ImagePair>& pairs,
                                           const TrainDetectorOptions& options) {
  if (pairs.size() < 2) throw DataError("train_subject_detector: need at least two pairs");
  const auto held = heldout_pairs(pairs.size(), options.holdout, options.seed);
  std::vector<bool> is_held(pairs.size(), false);
  for (auto i : held) is_held[i] = true;
  std::vector<Image> train_x, test_x;
  std::vector<int> train_y, test_y;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    auto& xs = is_held[i] ? test_x : train_x;
    auto& ys = is_held[i] ? test_y : train_y;
    xs.push_back(pairs[i].real);
    ys.push_back(kLabelReal);
    xs.push_back(pairs[i].fake);
    ys.push_back(kLabelFake);
  }
  auto result = train_detector(train_x, train_y, options);
  if (!test_x.empty()) {
    result.heldout_accuracy = accuracy(result.model, test_x, test_y);
    result.heldout_count = test_x.size();
  }
  return result;
}

}  // namespace deepnotch::adversary
