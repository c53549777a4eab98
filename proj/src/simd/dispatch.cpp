#include <cstdlib>
#include <string>

#include "echo/error.hpp"
#include "kernels_internal.hpp"

namespace echo::simd {

std::string_view to_string(Isa isa) {
  switch (isa) {
    case Isa::kScalar: return "scalar";
    case Isa::kAvx2: return "avx2";
    case Isa::kNeon: return "neon";
  }
  return "unknown";
}

bool is_supported(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2:
#if defined(ECHO_HAVE_AVX2)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::kNeon:
#if defined(ECHO_HAVE_NEON)
      return true;  // mandatory on AArch64
#else
      return false;
#endif
  }
  return false;
}

std::vector<Isa> supported_isas() {
  std::vector<Isa> out;
  for (Isa isa : {Isa::kScalar, Isa::kAvx2, Isa::kNeon}) {
    if (is_supported(isa)) out.push_back(isa);
  }
  return out;
}

const KernelTable& kernels_for(Isa isa) {
  if (!is_supported(isa)) {
    throw Error(ErrorCode::kInvalidArgument,
                "SIMD kernels not available on this machine: " + std::string(to_string(isa)));
  }
  switch (isa) {
#if defined(ECHO_HAVE_AVX2)
    case Isa::kAvx2: return detail::avx2_table();
#endif
#if defined(ECHO_HAVE_NEON)
    case Isa::kNeon: return detail::neon_table();
#endif
    default: return detail::scalar_table();
  }
}

namespace {

const KernelTable& resolve() {
  if (const char* forced = std::getenv("ECHO_SIMD")) {
    const std::string_view want(forced);
    for (Isa isa : {Isa::kScalar, Isa::kAvx2, Isa::kNeon}) {
      if (want == to_string(isa)) return is_supported(isa) ? kernels_for(isa) : detail::scalar_table();
    }
  }
  if (is_supported(Isa::kAvx2)) return kernels_for(Isa::kAvx2);
  if (is_supported(Isa::kNeon)) return kernels_for(Isa::kNeon);
  return detail::scalar_table();
}

}  // namespace

const KernelTable& active() {
  static const KernelTable& table = resolve();
  return table;
}

}  // namespace echo::simd
