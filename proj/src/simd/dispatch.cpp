#include <cstdlib>
#include <string>

#include "biopay/simd/kernels.hpp"

namespace biopay::simd {

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
  }
  return "unknown";
}

bool cpu_supports(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return true;
    case Isa::Avx2:
#if defined(__x86_64__) || defined(_M_X64)
      return avx2_kernels() != nullptr && __builtin_cpu_supports("avx2");
#else
      return false;
#endif
  }
  return false;
}

namespace {

const KernelTable& select_kernels() {
  if (const char* forced = std::getenv("BIOPAY_SIMD"); forced && std::string(forced) == "scalar") {
    return scalar_kernels();
  }
  if (cpu_supports(Isa::Avx2)) return *avx2_kernels();
  return scalar_kernels();
}

}  // namespace

const KernelTable& active_kernels() {
  static const KernelTable& table = select_kernels();
  return table;
}

}  // namespace biopay::simd
