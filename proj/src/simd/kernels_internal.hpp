#pragma once

#include "cwae/simd/kernels.hpp"

namespace cwae::simd::detail {

// Defined only in the translation unit built for the matching ISA; the
// dispatcher sees a null table otherwise.
const KernelTable* avx2_table();
const KernelTable* neon_table();

}  // namespace cwae::simd::detail
