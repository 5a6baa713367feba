#pragma once

// Forward/backward pairs for the handful of layers the autoencoder needs.
// Backward functions accumulate into Parameter::grad and return the gradient
// with respect to the layer input where one exists.

#include <cstdint>
#include <span>
#include <vector>

#include "cwae/tensor.hpp"

namespace cwae {

/// Gathers rows of a [V x E] table. Throws ValidationError on an index
/// outside [0, V).
Tensor embedding_forward(const Parameter& table, std::span<const std::int32_t> indices);

void embedding_backward(Parameter& table, std::span<const std::int32_t> indices,
                        const Tensor& grad_out);

/// out = x W + b for x [B x I], W [I x O], b [O].
Tensor affine_forward(const Tensor& x, const Parameter& weight, const Parameter& bias);

Tensor affine_backward(const Tensor& x, Parameter& weight, Parameter& bias,
                       const Tensor& grad_out);

Tensor relu_forward(const Tensor& x);

/// Passes the gradient where x > 0; the subgradient at 0 is 0.
Tensor relu_backward(const Tensor& x, const Tensor& grad_out);

struct CrossEntropy {
  double loss = 0.0;           // mean over rows
  std::vector<double> per_row;  // -log softmax(logits)[target] per row
  Tensor grad;                  // d loss / d logits = (softmax - onehot) / B
};

CrossEntropy softmax_cross_entropy(const Tensor& logits,
                                   std::span<const std::int32_t> targets);

/// Cross-entropy over the column block [offset, offset + width) of a wider
/// logits matrix. Adds each row's NLL to per_row_nll; when grad is non-null,
/// adds grad_scale * (softmax - onehot) into the same block of *grad.
/// Returns the mean NLL of the block.
double softmax_cross_entropy_block(const Tensor& logits, std::size_t offset,
                                   std::size_t width,
                                   std::span<const std::int32_t> targets,
                                   std::span<double> per_row_nll, Tensor* grad,
                                   double grad_scale);

struct Mmd {
  double value = 0.0;
  Tensor grad_z;  // empty unless requested
};

/// Biased (V-statistic) squared MMD between two equally sized samples under
/// the kernel k(a, b) = exp(-|a - b|^2 / (2 sigma^2)).
Mmd rbf_mmd(const Tensor& z, const Tensor& prior_samples, double sigma,
            bool with_grad = true);

/// sqrt(latent_dim / 2).
double default_mmd_sigma(std::size_t latent_dim);

}  // namespace cwae
