#pragma once

// Float32 inner-product kernels used by every similarity computation in the
// retrieval stack. A scalar reference implementation is always built; AVX2+FMA
// (x86-64) and NEON (AArch64) variants are compiled when the target allows and
// picked at runtime from the CPU feature set.
//
// The ECHO_SIMD environment variable ("scalar", "avx2", "neon") pins the choice
// for the whole process; an unsupported request falls back to scalar.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace echo::simd {

enum class Isa { kScalar, kAvx2, kNeon };

std::string_view to_string(Isa isa);

struct KernelTable {
  Isa isa;
  // sum_i a[i] * b[i]
  float (*dot)(const float* a, const float* b, std::size_t n);
  // out[r] = dot(query, rows + r * dim) for r in [0, n_rows). Each out[r] is
  // bit-identical to dot() on the same row.
  void (*dot_rows)(const float* query, const float* rows, std::size_t n_rows, std::size_t dim,
                   float* out);
  // x[i] *= s
  void (*scale)(float* x, float s, std::size_t n);
};

bool is_supported(Isa isa);

// Every ISA available on this machine, scalar first.
std::vector<Isa> supported_isas();

// Kernel table for a specific ISA. Throws echo::Error(kInvalidArgument) when the
// ISA is not supported on this CPU or was not compiled in.
const KernelTable& kernels_for(Isa isa);

// Process-wide kernel table, resolved once on first use.
const KernelTable& active();

inline float dot(std::span<const float> a, std::span<const float> b) {
  return active().dot(a.data(), b.data(), a.size());
}

}  // namespace echo::simd
