#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "deepnotch/nn/autograd.hpp"

namespace deepnotch::nn {

using DifferentiableFn = std::function<Var(const std::vector<Var>&)>;

// Compares reverse-mode gradients of fn at `inputs` against central finite
// differences with step eps. The output is projected onto a fixed random
// direction so any output shape works. Returns the worst elementwise
// relative error |a - n| / max(|a|, |n|, floor), where floor is 1% of the
// largest analytic gradient magnitude (guards near-zero entries).
// Throws NumericError naming the op when a non-finite value appears.
double gradient_check(const DifferentiableFn& fn, const std::vector<Tensor>& inputs, double eps,
                      std::uint64_t seed = 1);

}  // namespace deepnotch::nn
