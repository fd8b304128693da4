#include "deepnotch/nn/init.hpp"

#include <cmath>

#include "deepnotch/errors.hpp"

namespace deepnotch::nn {

Tensor he_normal(const Shape& weight_shape, Rng& rng) {
  if (weight_shape.size() != 4) throw ContractError("he_normal: expected OIkk shape, got " + shape_str(weight_shape));
  const int fan_in = weight_shape[1] * weight_shape[2] * weight_shape[3];
  const double stddev = std::sqrt(2.0 / fan_in);
  Tensor t(weight_shape);
  for (auto& v : t.data()) v = static_cast<float>(rng.normal(0.0, stddev));
  return t;
}

}  // namespace deepnotch::nn
