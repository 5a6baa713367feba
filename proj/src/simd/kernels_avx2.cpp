// Built with -mavx2 -mfma on x86-64 only. Nothing in here may run before the
// dispatcher has confirmed CPU support.

#include "kernels_internal.hpp"

#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

#include <cmath>

namespace cwae::simd {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// y[0..n) += alpha * x[0..n)
inline void axpy_body(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t j = 0;
  for (; j + 8 <= n; j += 8) {
    __m256d y0 = _mm256_loadu_pd(y + j);
    __m256d y1 = _mm256_loadu_pd(y + j + 4);
    y0 = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + j), y0);
    y1 = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + j + 4), y1);
    _mm256_storeu_pd(y + j, y0);
    _mm256_storeu_pd(y + j + 4, y1);
  }
  for (; j + 4 <= n; j += 4) {
    _mm256_storeu_pd(y + j, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + j),
                                            _mm256_loadu_pd(y + j)));
  }
  for (; j < n; ++j) y[j] = std::fma(alpha, x[j], y[j]);
}

double dot(const double* x, const double* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4),
                           _mm256_loadu_pd(y + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
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
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) axpy_body(ai[p], b + p * n, ci, n);
  }
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a,
             const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    const double* bi = b + i * n;
    for (std::size_t p = 0; p < k; ++p) axpy_body(ai[p], bi, c + p * n, n);
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
    const double* ai = a + i * d;
    for (std::size_t j = 0; j < nb; ++j) {
      const double* bj = b + j * d;
      __m256d acc = _mm256_setzero_pd();
      std::size_t t = 0;
      for (; t + 4 <= d; t += 4) {
        const __m256d diff =
            _mm256_sub_pd(_mm256_loadu_pd(ai + t), _mm256_loadu_pd(bj + t));
        acc = _mm256_fmadd_pd(diff, diff, acc);
      }
      double s = hsum(acc);
      for (; t < d; ++t) {
        const double diff = ai[t] - bj[t];
        s = std::fma(diff, diff, s);
      }
      out[i * nb + j] = s;
    }
  }
}

// No FMA here: the update is elementwise, so keeping the scalar operation
// order makes it bit-identical to the reference.
void adam_update(double* param, const double* grad, double* m, double* v,
                 std::size_t n, const AdamCoeffs& k) {
  const __m256d b1 = _mm256_set1_pd(k.beta1);
  const __m256d b2 = _mm256_set1_pd(k.beta2);
  const __m256d one_b1 = _mm256_set1_pd(1.0 - k.beta1);
  const __m256d one_b2 = _mm256_set1_pd(1.0 - k.beta2);
  const __m256d bc1 = _mm256_set1_pd(k.bias_correction1);
  const __m256d bc2 = _mm256_set1_pd(k.bias_correction2);
  const __m256d lr = _mm256_set1_pd(k.learning_rate);
  const __m256d eps = _mm256_set1_pd(k.epsilon);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d g = _mm256_loadu_pd(grad + i);
    __m256d mi = _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + i)),
                               _mm256_mul_pd(one_b1, g));
    __m256d vi = _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v + i)),
                               _mm256_mul_pd(one_b2, _mm256_mul_pd(g, g)));
    _mm256_storeu_pd(m + i, mi);
    _mm256_storeu_pd(v + i, vi);
    const __m256d m_hat = _mm256_div_pd(mi, bc1);
    const __m256d v_hat = _mm256_div_pd(vi, bc2);
    const __m256d step = _mm256_div_pd(_mm256_mul_pd(lr, m_hat),
                                       _mm256_add_pd(_mm256_sqrt_pd(v_hat), eps));
    _mm256_storeu_pd(param + i, _mm256_sub_pd(_mm256_loadu_pd(param + i), step));
  }
  if (i < n) {
    scalar_kernels().adam_update(param + i, grad + i, m + i, v + i, n - i, k);
  }
}

}  // namespace

namespace detail {
const KernelTable* avx2_table() {
  static const KernelTable table{Isa::avx2, gemm_nn, gemm_tn,  gemm_nt,
                                 dot,       axpy,    sq_dists, adam_update};
  return &table;
}
}  // namespace detail

}  // namespace cwae::simd

#else

namespace cwae::simd::detail {
const KernelTable* avx2_table() { return nullptr; }
}  // namespace cwae::simd::detail

#endif
