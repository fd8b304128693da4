#include "deepnotch/nn/layers.hpp"

#include "deepnotch/nn/init.hpp"
#include "deepnotch/nn/ops.hpp"

namespace deepnotch::nn {

Var Conv2d::operator()(const Var& x) const { return conv2d(x, weight, bias, stride, padding); }

Conv2d make_conv(int in_channels, int out_channels, int k, Rng& rng) {
  Conv2d c;
  c.weight = Var::leaf(he_normal({out_channels, in_channels, k, k}, rng), true);
  c.bias = Var::leaf(Tensor({out_channels}), true);
  c.padding = k / 2;
  return c;
}

void collect(NamedParams& out, const std::string& prefix, const Conv2d& conv) {
  out.emplace_back(prefix + ".weight", conv.weight);
  out.emplace_back(prefix + ".bias", conv.bias);
}

std::vector<Var> vars_of(const NamedParams& params) {
  std::vector<Var> v;
  v.reserve(params.size());
  for (const auto& [name, var] : params) v.push_back(var);
  return v;
}

std::size_t parameter_count(const NamedParams& params) {
  std::size_t n = 0;
  for (const auto& [name, var] : params) n += var.value().numel();
  return n;
}

}  // namespace deepnotch::nn
