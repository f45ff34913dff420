#pragma once

#include "labelprop/simd.hpp"

namespace labelprop::simd::detail {

const Kernels* avx2_kernels();  // null if not compiled in
const Kernels* neon_kernels();  // null if not compiled in

}  // namespace labelprop::simd::detail
