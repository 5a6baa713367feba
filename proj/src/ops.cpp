#include "cwae/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cwae/error.hpp"
#include "cwae/simd/kernels.hpp"

namespace cwae {
namespace {

void require(bool ok, const char* what) {
  if (!ok) throw ValidationError(what);
}

}  // namespace

Tensor embedding_forward(const Parameter& table, std::span<const std::int32_t> indices) {
  const std::size_t vocab = table.value.rows();
  const std::size_t dim = table.value.cols();
  Tensor out = Tensor::matrix(indices.size(), dim);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::int32_t idx = indices[i];
    if (idx < 0 || static_cast<std::size_t>(idx) >= vocab) {
      throw ValidationError("embedding index " + std::to_string(idx) +
                            " out of range for table '" + table.name + "' of " +
                            std::to_string(vocab) + " rows");
    }
    const auto src = table.value.row(static_cast<std::size_t>(idx));
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

void embedding_backward(Parameter& table, std::span<const std::int32_t> indices,
                        const Tensor& grad_out) {
  require(grad_out.rows() == indices.size() && grad_out.cols() == table.value.cols(),
          "embedding_backward: gradient shape mismatch");
  const auto& k = simd::active();
  const std::size_t dim = table.value.cols();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    k.axpy(1.0, grad_out.data() + i * dim,
           table.grad.data() + static_cast<std::size_t>(indices[i]) * dim, dim);
  }
}

Tensor affine_forward(const Tensor& x, const Parameter& weight, const Parameter& bias) {
  const std::size_t batch = x.rows();
  const std::size_t in = x.cols();
  const std::size_t out_dim = weight.value.cols();
  require(weight.value.rows() == in, "affine: input width does not match weight rows");
  require(bias.value.size() == out_dim, "affine: bias width does not match weight cols");

  Tensor out = Tensor::matrix(batch, out_dim);
  simd::active().gemm_nn(batch, out_dim, in, x.data(), weight.value.data(), out.data(),
                         false);
  for (std::size_t r = 0; r < batch; ++r) {
    double* row = out.data() + r * out_dim;
    for (std::size_t c = 0; c < out_dim; ++c) row[c] += bias.value[c];
  }
  return out;
}

Tensor affine_backward(const Tensor& x, Parameter& weight, Parameter& bias,
                       const Tensor& grad_out) {
  const std::size_t batch = x.rows();
  const std::size_t in = x.cols();
  const std::size_t out_dim = weight.value.cols();
  require(grad_out.rows() == batch && grad_out.cols() == out_dim,
          "affine_backward: gradient shape mismatch");

  const auto& k = simd::active();
  k.gemm_tn(batch, out_dim, in, x.data(), grad_out.data(), weight.grad.data());
  for (std::size_t r = 0; r < batch; ++r) {
    k.axpy(1.0, grad_out.data() + r * out_dim, bias.grad.data(), out_dim);
  }
  Tensor grad_x = Tensor::matrix(batch, in);
  k.gemm_nt(batch, out_dim, in, grad_out.data(), weight.value.data(), grad_x.data(),
            false);
  return grad_x;
}

Tensor relu_forward(const Tensor& x) {
  Tensor out = x;
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor relu_backward(const Tensor& x, const Tensor& grad_out) {
  require(x.size() == grad_out.size(), "relu_backward: shape mismatch");
  Tensor grad = grad_out;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0)) grad[i] = 0.0;
  }
  return grad;
}

double softmax_cross_entropy_block(const Tensor& logits, std::size_t offset,
                                   std::size_t width,
                                   std::span<const std::int32_t> targets,
                                   std::span<double> per_row_nll, Tensor* grad,
                                   double grad_scale) {
  const std::size_t batch = logits.rows();
  const std::size_t stride = logits.cols();
  require(targets.size() == batch && per_row_nll.size() == batch,
          "softmax_cross_entropy: target count does not match batch");
  require(offset + width <= stride && width > 0,
          "softmax_cross_entropy: block outside logits");

  double total = 0.0;
  for (std::size_t r = 0; r < batch; ++r) {
    const std::int32_t t = targets[r];
    if (t < 0 || static_cast<std::size_t>(t) >= width) {
      throw ValidationError("softmax_cross_entropy: target " + std::to_string(t) +
                            " outside [0, " + std::to_string(width) + ")");
    }
    const double* z = logits.data() + r * stride + offset;
    const std::size_t arg = static_cast<std::size_t>(std::max_element(z, z + width) - z);
    const double zmax = z[arg];
    // log-sum-exp = zmax + log1p(sum of the non-max terms), exact for tiny tails
    double rest = 0.0;
    for (std::size_t j = 0; j < width; ++j) {
      if (j != arg) rest += std::exp(z[j] - zmax);
    }
    const double lse = zmax + std::log1p(rest);
    const double nll = lse - z[t];
    per_row_nll[r] += nll;
    total += nll;
    if (grad != nullptr) {
      double* g = grad->data() + r * stride + offset;
      for (std::size_t j = 0; j < width; ++j) g[j] += grad_scale * std::exp(z[j] - lse);
      g[t] -= grad_scale;
    }
  }
  return batch == 0 ? 0.0 : total / static_cast<double>(batch);
}

CrossEntropy softmax_cross_entropy(const Tensor& logits,
                                   std::span<const std::int32_t> targets) {
  CrossEntropy out;
  const std::size_t batch = logits.rows();
  require(batch > 0, "softmax_cross_entropy: empty batch");
  out.per_row.assign(batch, 0.0);
  out.grad = Tensor::matrix(batch, logits.cols());
  out.loss = softmax_cross_entropy_block(logits, 0, logits.cols(), targets, out.per_row,
                                         &out.grad, 1.0 / static_cast<double>(batch));
  return out;
}

Mmd rbf_mmd(const Tensor& z, const Tensor& prior_samples, double sigma, bool with_grad) {
  const std::size_t n = z.rows();
  const std::size_t m = prior_samples.rows();
  const std::size_t dim = z.cols();
  if (n == 0 || m == 0) throw ValidationError("rbf_mmd: empty sample");
  if (!(sigma > 0.0)) throw ValidationError("rbf_mmd: sigma must be positive");
  require(n == m, "rbf_mmd: sample sizes differ");
  require(prior_samples.cols() == dim, "rbf_mmd: sample dimensions differ");

  const auto& k = simd::active();
  const double inv_two_s2 = 1.0 / (2.0 * sigma * sigma);
  auto kernel_matrix = [&](const Tensor& a, const Tensor& b) {
    Tensor d = Tensor::matrix(a.rows(), b.rows());
    k.sq_dists(a.data(), a.rows(), b.data(), b.rows(), dim, d.data());
    for (double& v : d.values()) v = std::exp(-v * inv_two_s2);
    return d;
  };
  auto mean = [](const Tensor& t) {
    double s = 0.0;
    for (double v : t.values()) s += v;
    return s / static_cast<double>(t.size());
  };

  const Tensor kzz = kernel_matrix(z, z);
  const Tensor kpp = kernel_matrix(prior_samples, prior_samples);
  const Tensor kzp = kernel_matrix(z, prior_samples);

  Mmd out;
  // Rounding can leave the V-statistic a few ulps below zero.
  out.value = std::max(0.0, mean(kzz) + mean(kpp) - 2.0 * mean(kzp));
  if (!with_grad) return out;

  // d/dz_i = (2 / s^2) [ -(1/n^2) sum_j Kzz_ij (z_i - z_j)
  //                      +(1/nm)  sum_j Kzp_ij (z_i - p_j) ]
  Tensor kzz_z = Tensor::matrix(n, dim);
  Tensor kzp_p = Tensor::matrix(n, dim);
  k.gemm_nn(n, dim, n, kzz.data(), z.data(), kzz_z.data(), false);
  k.gemm_nn(n, dim, m, kzp.data(), prior_samples.data(), kzp_p.data(), false);

  const double nn = static_cast<double>(n) * static_cast<double>(n);
  const double nm = static_cast<double>(n) * static_cast<double>(m);
  const double scale = 1.0 / (sigma * sigma) * 2.0;
  out.grad_z = Tensor::matrix(n, dim);
  for (std::size_t i = 0; i < n; ++i) {
    double rs_zz = 0.0;
    double rs_zp = 0.0;
    for (std::size_t j = 0; j < n; ++j) rs_zz += kzz(i, j);
    for (std::size_t j = 0; j < m; ++j) rs_zp += kzp(i, j);
    for (std::size_t t = 0; t < dim; ++t) {
      const double zi = z(i, t);
      const double self = (rs_zz * zi - kzz_z(i, t)) / nn;
      const double cross = (rs_zp * zi - kzp_p(i, t)) / nm;
      out.grad_z(i, t) = scale * (cross - self);
    }
  }
  return out;
}

double default_mmd_sigma(std::size_t latent_dim) {
  return std::sqrt(static_cast<double>(latent_dim) / 2.0);
}

}  // namespace cwae
