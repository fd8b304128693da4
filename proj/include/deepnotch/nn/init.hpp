#pragma once

#include "deepnotch/nn/rng.hpp"
#include "deepnotch/nn/tensor.hpp"

namespace deepnotch::nn {

// He-normal initialisation for a conv weight [O, I, k, k]: N(0, 2 / (I*k*k)).
Tensor he_normal(const Shape& weight_shape, Rng& rng);

}  // namespace deepnotch::nn
