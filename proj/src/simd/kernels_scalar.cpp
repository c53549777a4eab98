#include "kernels_internal.hpp"

namespace echo::simd::detail {
namespace {

float dot_scalar(const float* a, const float* b, std::size_t n) {
  float sum = 0.0f;
  for (std::size_t i = 0; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void dot_rows_scalar(const float* query, const float* rows, std::size_t n_rows, std::size_t dim,
                     float* out) {
  for (std::size_t r = 0; r < n_rows; ++r) out[r] = dot_scalar(query, rows + r * dim, dim);
}

void scale_scalar(float* x, float s, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= s;
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{Isa::kScalar, &dot_scalar, &dot_rows_scalar, &scale_scalar};
  return table;
}

}  // namespace echo::simd::detail
