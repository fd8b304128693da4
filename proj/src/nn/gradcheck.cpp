#include "deepnotch/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "deepnotch/errors.hpp"
#include "deepnotch/nn/rng.hpp"

namespace deepnotch::nn {

namespace {

double project(const Tensor& out, const Tensor& direction) {
  double s = 0;
  for (std::size_t i = 0; i < out.numel(); ++i) s += static_cast<double>(out[i]) * direction[i];
  return s;
}

}  // namespace

double gradient_check(const DifferentiableFn& fn, const std::vector<Tensor>& inputs, double eps,
                      std::uint64_t seed) {
  if (!(eps >= 1e-4 && eps <= 1e-2)) throw ContractError("gradient_check: eps must lie in [1e-4, 1e-2]");
  for (const auto& t : inputs) {
    if (!t.all_finite()) throw NumericError("gradient_check: non-finite input");
  }

  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(Var::leaf(t, true));
  Var out = fn(vars);
  const std::string op = out.op_name();
  if (!out.value().all_finite()) throw NumericError("gradient_check: non-finite output of op '" + op + "'");

  Rng rng(seed);
  Tensor direction(out.shape());
  for (auto& d : direction.data()) d = static_cast<float>(rng.uniform(-1.0, 1.0));
  out.backward(direction);

  double max_analytic = 0;
  for (const auto& v : vars) {
    if (!v.has_grad()) continue;
    for (float g : v.grad().data()) max_analytic = std::max(max_analytic, std::fabs(static_cast<double>(g)));
  }
  const double floor = std::max(1e-2 * max_analytic, 1e-6);

  double worst = 0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (std::size_t i = 0; i < inputs[k].numel(); ++i) {
      auto eval = [&](float delta) {
        std::vector<Var> shifted;
        for (std::size_t j = 0; j < inputs.size(); ++j) {
          Tensor t = inputs[j];
          if (j == k) t[i] += delta;
          shifted.push_back(Var::leaf(std::move(t), false));
        }
        NoGradGuard guard;
        Tensor y = fn(shifted).value();
        if (!y.all_finite()) throw NumericError("gradient_check: non-finite value in op '" + op + "'");
        return project(y, direction);
      };
      // Use the actually representable step so rounding of x +- eps does not bias the quotient.
      const float x = inputs[k][i];
      const float hi = x + static_cast<float>(eps);
      const float lo = x - static_cast<float>(eps);
      const double numeric = (eval(hi - x) - eval(lo - x)) / (static_cast<double>(hi) - lo);
      const double analytic = vars[k].has_grad() ? vars[k].grad()[i] : 0.0;
      const double denom = std::max({std::fabs(analytic), std::fabs(numeric), floor});
      worst = std::max(worst, std::fabs(analytic - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace deepnotch::nn
