#include "kernels_internal.hpp"

#if defined(__aarch64__)

#include <arm_neon.h>

namespace labelprop::simd {
namespace {

double dot_neon(const float* a, const float* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float32x4_t va = vld1q_f32(a + i);
    const float32x4_t vb = vld1q_f32(b + i);
    acc0 = vfmaq_f64(acc0, vcvt_f64_f32(vget_low_f32(va)), vcvt_f64_f32(vget_low_f32(vb)));
    acc1 = vfmaq_f64(acc1, vcvt_high_f64_f32(va), vcvt_high_f64_f32(vb));
  }
  double acc = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return acc;
}

void dot_rows_neon(const float* rows, std::size_t count, std::size_t dim, const float* query, float* out) {
  for (std::size_t r = 0; r < count; ++r) out[r] = static_cast<float>(dot_neon(rows + r * dim, query, dim));
}

void dot_rows_indexed_neon(const float* rows, const std::uint32_t* index, std::size_t count,
                           std::size_t dim, const float* query, float* out) {
  for (std::size_t t = 0; t < count; ++t)
    out[t] = static_cast<float>(dot_neon(rows + static_cast<std::size_t>(index[t]) * dim, query, dim));
}

float max_neon(const float* x, std::size_t n) {
  std::size_t i = 0;
  float m = x[0];
  if (n >= 4) {
    float32x4_t vm = vld1q_f32(x);
    for (i = 4; i + 4 <= n; i += 4) vm = vmaxq_f32(vm, vld1q_f32(x + i));
    m = vmaxvq_f32(vm);
  }
  for (; i < n; ++i)
    if (x[i] > m) m = x[i];
  return m;
}

OverlapCounts overlap_neon(const std::uint8_t* a, const std::uint8_t* b, std::size_t n) {
  OverlapCounts c;
  std::size_t i = 0;
  const uint8x16_t one = vdupq_n_u8(1);
  for (; i + 16 <= n; i += 16) {
    const uint8x16_t ma = vandq_u8(vtstq_u8(vld1q_u8(a + i), vld1q_u8(a + i)), one);
    const uint8x16_t mb = vandq_u8(vtstq_u8(vld1q_u8(b + i), vld1q_u8(b + i)), one);
    c.intersection += vaddvq_u8(vandq_u8(ma, mb));
    c.union_ += vaddvq_u8(vorrq_u8(ma, mb));
    c.first += vaddvq_u8(ma);
    c.second += vaddvq_u8(mb);
  }
  for (; i < n; ++i) {
    const bool x = a[i] != 0;
    const bool y = b[i] != 0;
    c.intersection += (x && y) ? 1 : 0;
    c.union_ += (x || y) ? 1 : 0;
    c.first += x ? 1 : 0;
    c.second += y ? 1 : 0;
  }
  return c;
}

}  // namespace

namespace detail {
const Kernels* neon_kernels() {
  static const Kernels k{Isa::Neon, dot_neon, dot_rows_neon, dot_rows_indexed_neon, max_neon, overlap_neon};
  return &k;
}
}  // namespace detail

}  // namespace labelprop::simd

#else

namespace labelprop::simd::detail {
const Kernels* neon_kernels() { return nullptr; }
}  // namespace labelprop::simd::detail

#endif
