#include "cwae/optim.hpp"

#include <algorithm>
#include <cmath>

#include "cwae/error.hpp"
#include "cwae/simd/kernels.hpp"

namespace cwae {

AdamState AdamState::for_params(std::span<Parameter* const> params, AdamConfig config) {
  AdamState s;
  s.config = config;
  for (const Parameter* p : params) {
    s.first_moment.emplace_back(p->value.shape());
    s.second_moment.emplace_back(p->value.shape());
  }
  return s;
}

void adam_step(std::span<Parameter* const> params, AdamState& state) {
  if (params.size() != state.first_moment.size()) {
    throw ValidationError("adam_step: optimizer state does not match parameter list");
  }
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const simd::AdamCoeffs coeffs{
      state.config.learning_rate,
      state.config.beta1,
      state.config.beta2,
      state.config.epsilon,
      1.0 - std::pow(state.config.beta1, t),
      1.0 - std::pow(state.config.beta2, t),
  };
  const auto& k = simd::active();
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    k.adam_update(p.value.data(), p.grad.data(), state.first_moment[i].data(),
                  state.second_moment[i].data(), p.value.size(), coeffs);
    p.zero_grad();
  }
}

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

GradCheckResult gradient_check(const std::function<double()>& loss,
                               const std::function<void()>& backward,
                               std::span<Parameter* const> params, double perturbation) {
  auto evaluate = [&] {
    const double v = loss();
    if (!std::isfinite(v)) throw DivergenceError("gradient_check: non-finite loss");
    return v;
  };

  for (Parameter* p : params) p->zero_grad();
  backward();
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (const Parameter* p : params) analytic.push_back(p->grad);

  GradCheckResult result;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = *params[pi];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double saved = p.value[i];
      p.value[i] = saved + perturbation;
      const double up = evaluate();
      p.value[i] = saved - perturbation;
      const double down = evaluate();
      p.value[i] = saved;
      const double numeric = (up - down) / (2.0 * perturbation);
      const double err = relative_error(analytic[pi][i], numeric);
      ++result.coordinates;
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_parameter = p.name;
        result.worst_index = i;
      }
    }
  }
  return result;
}

}  // namespace cwae
