#pragma once

#include <string>
#include <utility>
#include <vector>

#include "deepnotch/nn/autograd.hpp"
#include "deepnotch/nn/rng.hpp"

namespace deepnotch::nn {

// Trainable convolution with bias. Weight [out, in, k, k], bias [out].
struct Conv2d {
  Var weight;
  Var bias;
  int stride = 1;
  int padding = 0;

  Var operator()(const Var& x) const;
};

// He-normal weights, zero bias, "same" padding for odd k.
Conv2d make_conv(int in_channels, int out_channels, int k, Rng& rng);

using NamedParams = std::vector<std::pair<std::string, Var>>;

// Appends "<prefix>.weight" and "<prefix>.bias".
void collect(NamedParams& out, const std::string& prefix, const Conv2d& conv);
std::vector<Var> vars_of(const NamedParams& params);
std::size_t parameter_count(const NamedParams& params);

}  // namespace deepnotch::nn
