#include <cstdlib>
#include <string_view>

#include "kernels_internal.hpp"

namespace labelprop::simd {
namespace {

bool cpu_has(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return true;
    case Isa::Avx2:
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::Neon:
#if defined(__aarch64__)
      return true;  // mandatory on AArch64
#else
      return false;
#endif
  }
  return false;
}

const Kernels& select() {
  if (const char* env = std::getenv("LABELPROP_SIMD"); env != nullptr && std::string_view(env) == "scalar")
    return scalar_kernels();
  if (const Kernels* k = kernels_for(Isa::Avx2)) return *k;
  if (const Kernels* k = kernels_for(Isa::Neon)) return *k;
  return scalar_kernels();
}

}  // namespace

const Kernels* kernels_for(Isa isa) {
  if (!cpu_has(isa)) return nullptr;
  switch (isa) {
    case Isa::Scalar: return &scalar_kernels();
    case Isa::Avx2: return detail::avx2_kernels();
    case Isa::Neon: return detail::neon_kernels();
  }
  return nullptr;
}

const Kernels& active() {
  static const Kernels& k = select();
  return k;
}

}  // namespace labelprop::simd
