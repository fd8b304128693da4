#include "deepnotch/adversary/pgd.hpp"

#include <algorithm>
#include <cmath>

#include "deepnotch/errors.hpp"
#include "deepnotch/nn/ops.hpp"

namespace deepnotch::adversary {

using nn::Var;

void AttackConfig::validate() const {
  if (!(epsilon >= 0.0)) throw ConfigError("attack: epsilon must be >= 0");
  if (steps < 1) throw ConfigError("attack: steps must be >= 1");
  if (effective_step() > epsilon) throw ConfigError("attack: step size exceeds epsilon");
  if (label != kLabelReal && label != kLabelFake) throw ConfigError("attack: label must be 0 or 1");
}

std::vector<Image> pgd_batch(const DetectorModel& detector, const std::vector<Image>& images,
                             const AttackConfig& cfg) {
  cfg.validate();
  std::vector<Image> out;
  out.reserve(images.size());
  if (images.empty()) return out;
  const DetectorModel model = detector.frozen();
  const nn::Tensor x0 = images_to_tensor(images);
  nn::Tensor m(x0.shape());
  if (cfg.epsilon > 0.0) {
    const std::vector<int> labels(images.size(), cfg.label);
    const auto eps = static_cast<float>(cfg.epsilon);
    const auto step = static_cast<float>(cfg.effective_step());
    for (int it = 0; it < cfg.steps; ++it) {
      nn::Tensor xt = x0;
      for (std::size_t i = 0; i < xt.numel(); ++i) xt[i] += m[i];
      Var x = Var::leaf(std::move(xt), true);
      Var loss = nn::cross_entropy(model.forward(x), labels);
      loss.backward();
      const nn::Tensor& g = x.grad();
      if (!g.all_finite() || !std::isfinite(loss.value()[0])) {
        throw NumericError("pgd: non-finite gradient at iteration " + std::to_string(it) + " (loss " +
                           std::to_string(loss.value()[0]) + ")");
      }
      for (std::size_t i = 0; i < m.numel(); ++i) {
        const float s = g[i] > 0.0f ? step : (g[i] < 0.0f ? -step : 0.0f);
        float v = std::clamp(m[i] + s, -eps, eps);
        v = std::clamp(x0[i] + v, 0.0f, 1.0f) - x0[i];
        m[i] = v;
      }
    }
  }
  for (std::size_t n = 0; n < images.size(); ++n) out.push_back(tensor_to_image(m, static_cast<int>(n)));
  return out;
}

Image pgd_perturbation(const DetectorModel& detector, const Image& image, const AttackConfig& cfg) {
  return pgd_batch(detector, {image}, cfg).front();
}

double mean_loss(const DetectorModel& detector, const std::vector<Image>& images, int label) {
  if (images.empty()) throw ContractError("mean_loss: empty image set");
  nn::NoGradGuard guard;
  const std::vector<int> labels(images.size(), label);
  return nn::cross_entropy(detector.forward(Var::leaf(images_to_tensor(images))), labels).value()[0];
}

}  // namespace deepnotch::adversary
