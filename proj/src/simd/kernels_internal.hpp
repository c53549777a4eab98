#pragma once

#include "echo/simd/kernels.hpp"

namespace echo::simd::detail {

const KernelTable& scalar_table();
#if defined(ECHO_HAVE_AVX2)
const KernelTable& avx2_table();
#endif
#if defined(ECHO_HAVE_NEON)
const KernelTable& neon_table();
#endif

}  // namespace echo::simd::detail
