#pragma once

// Dense double-precision inner loops used by the differentiable layer.
//
// Every kernel has a scalar reference implementation. Vector variants
// (AVX2+FMA on x86-64, NEON on AArch64) are compiled into separate
// translation units and picked at runtime. All matrices are row-major and
// densely packed. Variants agree with the scalar reference up to rounding
// (FMA contraction and reassociated sums); tests/test_kernels.cpp pins the
// tolerance.

#include <cstddef>
#include <string_view>
#include <vector>

namespace cwae::simd {

enum class Isa { scalar, avx2, neon };

/// Bias-corrected Adam coefficients for one step.
struct AdamCoeffs {
  double learning_rate;
  double beta1;
  double beta2;
  double epsilon;
  double bias_correction1;  // 1 - beta1^t
  double bias_correction2;  // 1 - beta2^t
};

struct KernelTable {
  Isa isa;

  // C[m x n] = A[m x k] * B[k x n]  (C += ... when accumulate)
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  const double* b, double* c, bool accumulate);

  // C[k x n] += A[m x k]^T * B[m x n]
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  const double* b, double* c);

  // C[m x k] = A[m x n] * B[k x n]^T  (C += ... when accumulate)
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  const double* b, double* c, bool accumulate);

  double (*dot)(const double* x, const double* y, std::size_t n);

  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);

  // out[i * nb + j] = ||a_i - b_j||^2 for rows of A[na x d] and B[nb x d]
  void (*sq_dists)(const double* a, std::size_t na, const double* b,
                   std::size_t nb, std::size_t d, double* out);

  // In-place Adam update of n contiguous parameters.
  void (*adam_update)(double* param, const double* grad, double* m, double* v,
                      std::size_t n, const AdamCoeffs& coeffs);
};

const KernelTable& scalar_kernels();

bool isa_supported(Isa isa);

/// Throws ValidationError when the ISA is not compiled in or the CPU lacks it.
const KernelTable& kernels_for(Isa isa);

/// Kernel table used by the tensor ops. Defaults to the widest supported ISA;
/// the CWAE_ISA environment variable (scalar|avx2|neon|auto) overrides it.
const KernelTable& active();

void set_active(Isa isa);

std::vector<Isa> supported_isas();

std::string_view isa_name(Isa isa);
Isa parse_isa(std::string_view name);

}  // namespace cwae::simd
