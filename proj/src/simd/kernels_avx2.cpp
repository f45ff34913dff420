// Built with -mavx2 -mfma; only reached after a runtime CPU check.
#include "kernels_internal.hpp"

#if defined(__x86_64__) && defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

#include <bit>

namespace labelprop::simd {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot_avx2(const float* a, const float* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 va = _mm256_loadu_ps(a + i);
    const __m256 vb = _mm256_loadu_ps(b + i);
    acc0 = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm256_castps256_ps128(va)),
                           _mm256_cvtps_pd(_mm256_castps256_ps128(vb)), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm256_extractf128_ps(va, 1)),
                           _mm256_cvtps_pd(_mm256_extractf128_ps(vb, 1)), acc1);
  }
  if (i + 4 <= n) {
    acc0 = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm_loadu_ps(a + i)), _mm256_cvtps_pd(_mm_loadu_ps(b + i)), acc0);
    i += 4;
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return acc;
}

void dot_rows_avx2(const float* rows, std::size_t count, std::size_t dim, const float* query, float* out) {
  for (std::size_t r = 0; r < count; ++r) out[r] = static_cast<float>(dot_avx2(rows + r * dim, query, dim));
}

void dot_rows_indexed_avx2(const float* rows, const std::uint32_t* index, std::size_t count,
                           std::size_t dim, const float* query, float* out) {
  for (std::size_t t = 0; t < count; ++t)
    out[t] = static_cast<float>(dot_avx2(rows + static_cast<std::size_t>(index[t]) * dim, query, dim));
}

float max_avx2(const float* x, std::size_t n) {
  std::size_t i = 0;
  float m = x[0];
  if (n >= 8) {
    __m256 vm = _mm256_loadu_ps(x);
    for (i = 8; i + 8 <= n; i += 8) vm = _mm256_max_ps(vm, _mm256_loadu_ps(x + i));
    __m128 h = _mm_max_ps(_mm256_castps256_ps128(vm), _mm256_extractf128_ps(vm, 1));
    h = _mm_max_ps(h, _mm_movehl_ps(h, h));
    h = _mm_max_ss(h, _mm_shuffle_ps(h, h, 1));
    m = _mm_cvtss_f32(h);
  }
  for (; i < n; ++i)
    if (x[i] > m) m = x[i];
  return m;
}

OverlapCounts overlap_avx2(const std::uint8_t* a, const std::uint8_t* b, std::size_t n) {
  OverlapCounts c;
  const __m256i zero = _mm256_setzero_si256();
  std::size_t i = 0;
  for (; i + 32 <= n; i += 32) {
    const __m256i va = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(a + i));
    const __m256i vb = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(b + i));
    const auto ma = ~static_cast<std::uint32_t>(_mm256_movemask_epi8(_mm256_cmpeq_epi8(va, zero)));
    const auto mb = ~static_cast<std::uint32_t>(_mm256_movemask_epi8(_mm256_cmpeq_epi8(vb, zero)));
    c.intersection += static_cast<std::uint64_t>(std::popcount(ma & mb));
    c.union_ += static_cast<std::uint64_t>(std::popcount(ma | mb));
    c.first += static_cast<std::uint64_t>(std::popcount(ma));
    c.second += static_cast<std::uint64_t>(std::popcount(mb));
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
const Kernels* avx2_kernels() {
  static const Kernels k{Isa::Avx2, dot_avx2, dot_rows_avx2, dot_rows_indexed_avx2, max_avx2, overlap_avx2};
  return &k;
}
}  // namespace detail

}  // namespace labelprop::simd

#else

namespace labelprop::simd::detail {
const Kernels* avx2_kernels() { return nullptr; }
}  // namespace labelprop::simd::detail

#endif
