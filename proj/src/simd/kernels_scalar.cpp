#include "kernels_internal.hpp"

namespace labelprop::simd {
namespace {

double dot_scalar(const float* a, const float* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return acc;
}

void dot_rows_scalar(const float* rows, std::size_t count, std::size_t dim, const float* query,
                     float* out) {
  for (std::size_t r = 0; r < count; ++r) out[r] = static_cast<float>(dot_scalar(rows + r * dim, query, dim));
}

void dot_rows_indexed_scalar(const float* rows, const std::uint32_t* index, std::size_t count,
                             std::size_t dim, const float* query, float* out) {
  for (std::size_t t = 0; t < count; ++t)
    out[t] = static_cast<float>(dot_scalar(rows + static_cast<std::size_t>(index[t]) * dim, query, dim));
}

float max_scalar(const float* x, std::size_t n) {
  float m = x[0];
  for (std::size_t i = 1; i < n; ++i)
    if (x[i] > m) m = x[i];
  return m;
}

OverlapCounts overlap_scalar(const std::uint8_t* a, const std::uint8_t* b, std::size_t n) {
  OverlapCounts c;
  for (std::size_t i = 0; i < n; ++i) {
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

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
  }
  return "unknown";
}

const Kernels& scalar_kernels() {
  static const Kernels k{Isa::Scalar, dot_scalar, dot_rows_scalar, dot_rows_indexed_scalar, max_scalar,
                         overlap_scalar};
  return k;
}

}  // namespace labelprop::simd
