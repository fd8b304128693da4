#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "deepnotch/nn/autograd.hpp"
#include "deepnotch/nn/tensor.hpp"

namespace deepnotch::nn {

struct OptimizerState {
  float learning_rate = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float epsilon = 1e-8f;
  std::int64_t step = 0;
  std::vector<Tensor> first_moment;   // one per parameter, allocated on first step
  std::vector<Tensor> second_moment;
};

// One bias-corrected Adam update of params[i] using grads[i]. An empty grad
// tensor is treated as zero.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads,
               OptimizerState& state);

// Adam over a fixed list of trainable Vars.
class Adam {
 public:
  Adam(std::vector<Var> params, float learning_rate);

  void zero_grad();
  void step();
  const OptimizerState& state() const { return state_; }

 private:
  std::vector<Var> params_;
  OptimizerState state_;
};

}  // namespace deepnotch::nn
