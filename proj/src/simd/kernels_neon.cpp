#include "kernels_internal.hpp"

#if defined(__aarch64__) && defined(__ARM_NEON)

#include <arm_neon.h>

#include <cmath>

namespace cwae::simd {
namespace {

inline void axpy_body(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    float64x2_t y0 = vld1q_f64(y + j);
    float64x2_t y1 = vld1q_f64(y + j + 2);
    y0 = vfmaq_f64(y0, va, vld1q_f64(x + j));
    y1 = vfmaq_f64(y1, va, vld1q_f64(x + j + 2));
    vst1q_f64(y + j, y0);
    vst1q_f64(y + j + 2, y1);
  }
  for (; j < n; ++j) y[j] = std::fma(alpha, x[j], y[j]);
}

double dot(const double* x, const double* y, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(x + i), vld1q_f64(y + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(x + i + 2), vld1q_f64(y + i + 2));
  }
  double s = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) s = std::fma(x[i], y[i], s);
  return s;
}

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a,
             const double* b, double* c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    if (!accumulate) {
      for (std::size_t j = 0; j < n; ++j) ci[j] = 0.0;
    }
    for (std::size_t p = 0; p < k; ++p) axpy_body(a[i * k + p], b + p * n, ci, n);
  }
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a,
             const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      axpy_body(a[i * k + p], b + i * n, c + p * n, n);
    }
  }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a,
             const double* b, double* c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t q = 0; q < k; ++q) {
      const double s = dot(a + i * n, b + q * n, n);
      c[i * k + q] = accumulate ? c[i * k + q] + s : s;
    }
  }
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  axpy_body(alpha, x, y, n);
}

void sq_dists(const double* a, std::size_t na, const double* b, std::size_t nb,
              std::size_t d, double* out) {
  for (std::size_t i = 0; i < na; ++i) {
    for (std::size_t j = 0; j < nb; ++j) {
      const double* ai = a + i * d;
      const double* bj = b + j * d;
      float64x2_t acc = vdupq_n_f64(0.0);
      std::size_t t = 0;
      for (; t + 2 <= d; t += 2) {
        const float64x2_t diff = vsubq_f64(vld1q_f64(ai + t), vld1q_f64(bj + t));
        acc = vfmaq_f64(acc, diff, diff);
      }
      double s = vaddvq_f64(acc);
      for (; t < d; ++t) {
        const double diff = ai[t] - bj[t];
        s = std::fma(diff, diff, s);
      }
      out[i * nb + j] = s;
    }
  }
}

void adam_update(double* param, const double* grad, double* m, double* v,
                 std::size_t n, const AdamCoeffs& k) {
  const float64x2_t b1 = vdupq_n_f64(k.beta1);
  const float64x2_t b2 = vdupq_n_f64(k.beta2);
  const float64x2_t one_b1 = vdupq_n_f64(1.0 - k.beta1);
  const float64x2_t one_b2 = vdupq_n_f64(1.0 - k.beta2);
  const float64x2_t bc1 = vdupq_n_f64(k.bias_correction1);
  const float64x2_t bc2 = vdupq_n_f64(k.bias_correction2);
  const float64x2_t lr = vdupq_n_f64(k.learning_rate);
  const float64x2_t eps = vdupq_n_f64(k.epsilon);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t g = vld1q_f64(grad + i);
    const float64x2_t mi =
        vaddq_f64(vmulq_f64(b1, vld1q_f64(m + i)), vmulq_f64(one_b1, g));
    const float64x2_t vi = vaddq_f64(vmulq_f64(b2, vld1q_f64(v + i)),
                                     vmulq_f64(one_b2, vmulq_f64(g, g)));
    vst1q_f64(m + i, mi);
    vst1q_f64(v + i, vi);
    const float64x2_t step =
        vdivq_f64(vmulq_f64(lr, vdivq_f64(mi, bc1)),
                  vaddq_f64(vsqrtq_f64(vdivq_f64(vi, bc2)), eps));
    vst1q_f64(param + i, vsubq_f64(vld1q_f64(param + i), step));
  }
  if (i < n) {
    scalar_kernels().adam_update(param + i, grad + i, m + i, v + i, n - i, k);
  }
}

}  // namespace

namespace detail {
const KernelTable* neon_table() {
  static const KernelTable table{Isa::neon, gemm_nn, gemm_tn,  gemm_nt,
                                 dot,       axpy,    sq_dists, adam_update};
  return &table;
}
}  // namespace detail

}  // namespace cwae::simd

#else

namespace cwae::simd::detail {
const KernelTable* neon_table() { return nullptr; }
}  // namespace cwae::simd::detail

#endif
