#include "deepnotch/kpn/kpn.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "deepnotch/errors.hpp"
#include "deepnotch/nn/ops.hpp"
#include "deepnotch/nn/optim.hpp"

namespace deepnotch::kpn {

using nn::Tensor;
using nn::Var;

double KernelField::max_normalization_error() const {
  const int KK = kernel_size * kernel_size;
  const std::size_t plane = static_cast<std::size_t>(height()) * width();
  double worst = 0.0;
  for (std::size_t p = 0; p < plane; ++p) {
    double s = 0.0;
    for (int t = 0; t < KK; ++t) s += weights[t * plane + p];
    worst = std::max(worst, std::fabs(s - 1.0));
  }
  return worst;
}

double KernelField::mean_delta_distance() const {
  const int KK = kernel_size * kernel_size;
  const int centre = KK / 2;
  const std::size_t plane = static_cast<std::size_t>(height()) * width();
  double total = 0.0;
  for (std::size_t p = 0; p < plane; ++p) {
    double d = 0.0;
    for (int t = 0; t < KK; ++t) d += std::fabs(weights[t * plane + p] - (t == centre ? 1.0 : 0.0));
    total += 0.5 * d;
  }
  return total / static_cast<double>(plane);
}

KernelField KernelField::identity(int height, int width, int kernel_size) {
  KernelField f;
  f.kernel_size = kernel_size;
  f.weights = Tensor({1, kernel_size * kernel_size, height, width});
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  std::fill_n(f.weights.ptr() + (kernel_size * kernel_size / 2) * plane, plane, 1.0f);
  return f;
}

Image pixelwise_filter(const Image& image, const KernelField& kernels) {
  if (kernels.weights.rank() != 4 || kernels.height() != image.height() || kernels.width() != image.width()) {
    throw ContractError("pixelwise_filter: kernel field " + nn::shape_str(kernels.weights.shape()) +
                        " does not match image " + std::to_string(image.height()) + "x" +
                        std::to_string(image.width()));
  }
  if (kernels.max_normalization_error() > 1e-4) {
    throw ContractError("pixelwise_filter: kernels are not normalized");
  }
  nn::NoGradGuard guard;
  Var out = nn::pixelwise_filter(Var::leaf(image_to_tensor(image)), Var::leaf(kernels.weights),
                                 kernels.kernel_size, true);
  return tensor_to_image(out.value());
}

// ---------------------------------------------------------------------------

const char* noise_family_name(NoiseFamily f) { return f == NoiseFamily::kGaussian ? "gaussian" : "uniform"; }

NoiseFamily parse_noise_family(const std::string& name) {
  if (name == "gaussian" || name == "gau") return NoiseFamily::kGaussian;
  if (name == "uniform" || name == "uni") return NoiseFamily::kUniform;
  throw ConfigError("unknown noise family '" + name + "'");
}

NoiseSpec NoiseSpec::gaussian(double sigma, double mean) {
  NoiseSpec n;
  n.family = NoiseFamily::kGaussian;
  n.sigma = sigma;
  n.mean = mean;
  return n;
}

NoiseSpec NoiseSpec::uniform(double lower, double upper) {
  NoiseSpec n;
  n.family = NoiseFamily::kUniform;
  n.lower = lower;
  n.upper = upper;
  return n;
}

void NoiseSpec::validate() const {
  if (family == NoiseFamily::kGaussian && !(sigma >= 0.0)) throw ConfigError("noise: sigma must be >= 0");
  if (family == NoiseFamily::kUniform && !(lower < upper)) throw ConfigError("noise: uniform needs lower < upper");
  if (!(area > 0.0 && area <= 1.0)) throw ConfigError("noise: area fraction must lie in (0, 1]");
}

double NoiseSpec::expected_l1() const {
  double e = 0.0;
  if (family == NoiseFamily::kGaussian) {
    // E|mu + sigma Z| for a folded normal.
    if (sigma == 0.0) {
      e = std::fabs(mean);
    } else {
      const double r = mean / sigma;
      e = sigma * std::sqrt(2.0 / std::numbers::pi) * std::exp(-0.5 * r * r) + mean * std::erf(r / std::sqrt(2.0));
    }
  } else {
    const double a = lower, b = upper;
    e = (a >= 0.0 || b <= 0.0) ? std::fabs(a + b) / 2.0 : (a * a + b * b) / (2.0 * (b - a));
  }
  return e * amplitude_scale() / 255.0;
}

std::vector<float> NoiseSpec::sample(std::size_t count, nn::Rng& rng) const {
  validate();
  const double s = amplitude_scale() / 255.0;
  std::vector<float> out(count);
  if (family == NoiseFamily::kGaussian) {
    for (auto& v : out) v = static_cast<float>(s * rng.normal(mean, sigma));
  } else {
    for (auto& v : out) v = static_cast<float>(s * rng.uniform(lower, upper));
  }
  return out;
}

// ---------------------------------------------------------------------------

KpnModel::KpnModel(const KpnOptions& options, std::uint64_t seed) : options_(options) {
  if (options.kernel_size != 3 && options.kernel_size != 5) throw ConfigError("kpn: kernel size must be 3 or 5");
  if (options.base_width < 1) throw ConfigError("kpn: base width must be positive");
  nn::Rng rng(seed);
  const int w1 = options.base_width, w2 = 2 * w1, w3 = 4 * w1;
  const int KK = options.kernel_size * options.kernel_size;
  e1a_ = nn::make_conv(3, w1, 3, rng);
  e1b_ = nn::make_conv(w1, w1, 3, rng);
  e2a_ = nn::make_conv(w1, w2, 3, rng);
  e2b_ = nn::make_conv(w2, w2, 3, rng);
  e3a_ = nn::make_conv(w2, w3, 3, rng);
  e3b_ = nn::make_conv(w3, w3, 3, rng);
  d2a_ = nn::make_conv(w3 + w2, w2, 3, rng);
  d2b_ = nn::make_conv(w2, w2, 3, rng);
  d1a_ = nn::make_conv(w2 + w1, w1, 3, rng);
  d1b_ = nn::make_conv(w1, w1, 3, rng);
  head_ = nn::make_conv(w1, KK, 1, rng);
  // Small head and a centre-tap bias: training starts close to identity.
  for (auto& v : head_.weight.mutable_value().data()) v *= 0.1f;
  head_.bias.mutable_value()[KK / 2] = 2.0f;

  nn::collect(params_, "enc1a", e1a_);
  nn::collect(params_, "enc1b", e1b_);
  nn::collect(params_, "enc2a", e2a_);
  nn::collect(params_, "enc2b", e2b_);
  nn::collect(params_, "enc3a", e3a_);
  nn::collect(params_, "enc3b", e3b_);
  nn::collect(params_, "dec2a", d2a_);
  nn::collect(params_, "dec2b", d2b_);
  nn::collect(params_, "dec1a", d1a_);
  nn::collect(params_, "dec1b", d1b_);
  nn::collect(params_, "head", head_);
}

Var KpnModel::forward(const Var& x) const {
  const auto& s = x.shape();
  if (s.size() != 4 || s[1] != 3) throw DimensionError("kpn: expected [N, 3, H, W], got " + nn::shape_str(s));
  if (s[2] % 4 != 0 || s[3] % 4 != 0) {
    throw DimensionError("kpn: image dims " + std::to_string(s[2]) + "x" + std::to_string(s[3]) +
                         " must be divisible by 4");
  }
  using nn::relu;
  Var e1 = relu(e1b_(relu(e1a_(x))));
  Var e2 = relu(e2b_(relu(e2a_(nn::avg_pool2d(e1, 2)))));
  Var e3 = relu(e3b_(relu(e3a_(nn::avg_pool2d(e2, 2)))));
  Var d2 = relu(d2b_(relu(d2a_(nn::concat_channels(nn::upsample_bilinear2x(e3), e2)))));
  Var d1 = relu(d1b_(relu(d1a_(nn::concat_channels(nn::upsample_bilinear2x(d2), e1)))));
  return head_(d1);
}

Var KpnModel::kernels(const Var& x) const { return nn::softmax_channels(forward(x)); }

KernelField KpnModel::predict_kernels(const Image& image) const {
  if (image.channels() != 3) throw DimensionError("kpn: expected a 3-channel image");
  nn::NoGradGuard guard;
  KernelField f;
  f.kernel_size = options_.kernel_size;
  f.weights = kernels(Var::leaf(image_to_tensor(image))).value();
  return f;
}

KernelField kpn_predict_kernels(const KpnModel& model, const Image& image) { return model.predict_kernels(image); }

io::Checkpoint KpnModel::to_checkpoint() const {
  io::Checkpoint c;
  c.kind = io::ModelKind::kKpn;
  c.metadata = {{"kernel_size", options_.kernel_size}, {"base_width", options_.base_width}};
  for (const auto& [name, var] : params_) c.tensors.push_back({name, var.value()});
  return c;
}

KpnModel KpnModel::from_checkpoint(const io::Checkpoint& ckpt) {
  if (ckpt.kind != io::ModelKind::kKpn) {
    throw CheckpointError(CheckpointError::Reason::kUnknownKind,
                          std::string("expected a kpn checkpoint, got ") + io::model_kind_name(ckpt.kind));
  }
  KpnOptions o;
  o.kernel_size = static_cast<int>(ckpt.meta("kernel_size"));
  o.base_width = static_cast<int>(ckpt.meta("base_width"));
  KpnModel m(o, 0);
  io::assign_parameters(ckpt, io::ModelKind::kKpn, m.params_);
  return m;
}

void KpnModel::save(const std::filesystem::path& path) const { io::save_checkpoint(to_checkpoint(), path); }

KpnModel KpnModel::load(const std::filesystem::path& path) { return from_checkpoint(io::load_checkpoint(path)); }

// ---------------------------------------------------------------------------

namespace {

void check_guidance(const Image& fake, const adversary::GuidanceMap* guidance) {
  if (guidance && !guidance->matches(fake)) {
    throw ContractError("guidance map " + std::to_string(guidance->height) + "x" + std::to_string(guidance->width) +
                        "x" + std::to_string(guidance->channels) + " does not match image " +
                        std::to_string(fake.height()) + "x" + std::to_string(fake.width()) + "x" +
                        std::to_string(fake.channels()));
  }
}

std::vector<float> masked_noise(const Image& like, const NoiseSpec& noise, const adversary::GuidanceMap* guidance,
                                nn::Rng& rng) {
  check_guidance(like, guidance);
  std::vector<float> n = noise.sample(like.size(), rng);
  if (guidance) {
    for (std::size_t i = 0; i < n.size(); ++i) n[i] *= static_cast<float>(guidance->mask[i]);
  }
  return n;
}

Image noised_copy(const Image& fake, const NoiseSpec& noise, const adversary::GuidanceMap* guidance, nn::Rng& rng) {
  const std::vector<float> n = masked_noise(fake, noise, guidance, rng);
  Image out = fake;
  auto px = out.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) px[i] += n[i];
  out.clamp();
  return out;
}

}  // namespace

TrainKpnResult train_kpn(const std::vector<io::ImagePair>& pairs, const NoiseSpec& noise,
                         const TrainKpnOptions& options) {
  if (pairs.empty()) throw DataError("train_kpn: empty dataset");
  if (options.epochs < 1 || options.batch < 1) throw ConfigError("train_kpn: epochs and batch must be >= 1");
  noise.validate();
  nn::Rng rng(nn::derive_seed(options.seed, 0));
  TrainKpnResult result{KpnModel(options.model, nn::derive_seed(options.seed, 1)), {}, {}};
  nn::Adam adam(nn::vars_of(result.model.parameters()), options.learning_rate);
  const int K = options.model.kernel_size;

  std::vector<std::size_t> order(pairs.size());
  std::int64_t step = 0;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double epoch_sum = 0.0;
    std::size_t epoch_steps = 0;
    for (std::size_t start = 0; start < order.size(); start += options.batch) {
      const std::size_t end = std::min(order.size(), start + options.batch);
      std::vector<Image> inputs, targets;
      for (std::size_t j = start; j < end; ++j) {
        const auto& p = pairs[order[j]];
        inputs.push_back(noised_copy(p.fake, noise, nullptr, rng));
        targets.push_back(p.real);
      }
      Var x = Var::leaf(images_to_tensor(inputs));
      Var y = Var::leaf(images_to_tensor(targets));
      Var out = nn::pixelwise_filter(x, result.model.kernels(x), K, true);
      Var loss = nn::l1_loss(out, y);
      const double l = loss.value()[0];
      if (!std::isfinite(l)) {
        throw NumericError("train_kpn: non-finite loss at step " + std::to_string(step) + " (epoch " +
                           std::to_string(epoch) + ")");
      }
      adam.zero_grad();
      loss.backward();
      adam.step();
      result.loss_curve.push_back(l);
      if (options.on_step) options.on_step(step, l);
      epoch_sum += l;
      ++epoch_steps;
      ++step;
    }
    result.epoch_loss.push_back(epoch_sum / static_cast<double>(epoch_steps));
  }
  return result;
}

std::vector<float> noise_field(const Image& like, const NoiseSpec& noise, const adversary::GuidanceMap* guidance,
                               std::uint64_t seed) {
  nn::Rng rng(seed);
  return masked_noise(like, noise, guidance, rng);
}

Image add_noise(const Image& fake, const NoiseSpec& noise, const adversary::GuidanceMap* guidance,
                std::uint64_t seed) {
  nn::Rng rng(seed);
  return noised_copy(fake, noise, guidance, rng);
}

Var reconstruct_graph(const KpnModel& model, const Image& noised) {
  Var x = Var::leaf(image_to_tensor(noised));
  return nn::pixelwise_filter(x, model.kernels(x), model.options().kernel_size, true);
}

Image deepnotch_reconstruct(const KpnModel& model, const Image& fake, const NoiseSpec& noise,
                            const adversary::GuidanceMap* guidance, std::uint64_t seed) {
  const Image noised = add_noise(fake, noise, guidance, seed);
  nn::NoGradGuard guard;
  return tensor_to_image(reconstruct_graph(model, noised).value());
}

}  // namespace deepnotch::kpn
