#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cwae/tensor.hpp"

namespace cwae {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::uint64_t step_count = 0;

  /// Zeroed moments shaped like params.
  static AdamState for_params(std::span<Parameter* const> params, AdamConfig config);
};

/// One bias-corrected Adam update over every parameter, then zeroes the
/// gradients. Parameters must be passed in the same order as for_params.
void adam_step(std::span<Parameter* const> params, AdamState& state);

/// |a - n| / max(1e-8, |a| + |n|)
double relative_error(double analytic, double numeric);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  std::size_t coordinates = 0;
};

/// Compares analytic gradients against central differences
/// (f(theta + h) - f(theta - h)) / 2h over every coordinate of params.
/// `backward` must fill Parameter::grad for the current values (grads are
/// zeroed before it runs). Throws DivergenceError on a non-finite loss.
GradCheckResult gradient_check(const std::function<double()>& loss,
                               const std::function<void()>& backward,
                               std::span<Parameter* const> params,
                               double perturbation = 1e-5);

}  // namespace cwae
