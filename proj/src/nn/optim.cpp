#include "deepnotch/nn/optim.hpp"

#include <cmath>
#include <string>

#include "deepnotch/errors.hpp"

namespace deepnotch::nn {

void adam_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads,
               OptimizerState& state) {
  if (params.size() != grads.size()) {
    throw ContractError("adam_step: " + std::to_string(params.size()) + " params but " +
                        std::to_string(grads.size()) + " grads");
  }
  if (!(state.learning_rate > 0.0f)) throw ContractError("adam_step: learning rate must be positive");
  if (state.first_moment.empty()) {
    for (const Tensor* p : params) {
      state.first_moment.emplace_back(p->shape());
      state.second_moment.emplace_back(p->shape());
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw ContractError("adam_step: optimizer state tracks " + std::to_string(state.first_moment.size()) +
                        " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    require_same_shape(*params[i], state.first_moment[i], "adam_step moment");
    if (!grads[i]->empty()) require_same_shape(*params[i], *grads[i], "adam_step grad");
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const float c1 = static_cast<float>(1.0 / (1.0 - std::pow(static_cast<double>(state.beta1), t)));
  const float c2 = static_cast<float>(1.0 / (1.0 - std::pow(static_cast<double>(state.beta2), t)));
  const float b1 = state.beta1, b2 = state.beta2, lr = state.learning_rate, eps = state.epsilon;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    Tensor& m = state.first_moment[i];
    Tensor& v = state.second_moment[i];
    const Tensor& g = *grads[i];
    const bool zero = g.empty();
    for (std::size_t j = 0; j < p.numel(); ++j) {
      const float gj = zero ? 0.0f : g[j];
      m[j] = b1 * m[j] + (1.0f - b1) * gj;
      v[j] = b2 * v[j] + (1.0f - b2) * gj * gj;
      p[j] -= lr * (m[j] * c1) / (std::sqrt(v[j] * c2) + eps);
    }
  }
}

Adam::Adam(std::vector<Var> params, float learning_rate) : params_(std::move(params)) {
  state_.learning_rate = learning_rate;
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

void Adam::step() {
  std::vector<Tensor*> values;
  std::vector<const Tensor*> grads;
  for (auto& p : params_) {
    values.push_back(&p.mutable_value());
    grads.push_back(&p.grad());
  }
  adam_step(values, grads, state_);
}

}  // namespace deepnotch::nn
