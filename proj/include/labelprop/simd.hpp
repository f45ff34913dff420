#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace labelprop::simd {

enum class Isa { Scalar, Avx2, Neon };

std::string_view isa_name(Isa isa);

struct OverlapCounts {
  std::uint64_t intersection = 0;
  std::uint64_t union_ = 0;
  std::uint64_t first = 0;
  std::uint64_t second = 0;
  bool operator==(const OverlapCounts&) const = default;
};

/// Inner loops used by the engine and the metrics. Every table computes the
/// same quantities; floating point results may differ by accumulation order.
struct Kernels {
  Isa isa = Isa::Scalar;

  /// Dot product of two float vectors with double accumulation.
  double (*dot)(const float* a, const float* b, std::size_t n) = nullptr;

  /// out[r] = float(dot(rows + r * dim, query)) for r in [0, count).
  void (*dot_rows)(const float* rows, std::size_t count, std::size_t dim, const float* query,
                   float* out) = nullptr;

  /// out[t] = float(dot(rows + index[t] * dim, query)) for t in [0, count).
  void (*dot_rows_indexed)(const float* rows, const std::uint32_t* index, std::size_t count,
                           std::size_t dim, const float* query, float* out) = nullptr;

  /// Largest element; n must be positive.
  float (*max_value)(const float* x, std::size_t n) = nullptr;

  /// Pixel counts of two 0/1 byte masks.
  OverlapCounts (*overlap)(const std::uint8_t* a, const std::uint8_t* b, std::size_t n) = nullptr;
};

const Kernels& scalar_kernels();

/// Null when the ISA was not compiled in or the CPU lacks it.
const Kernels* kernels_for(Isa isa);

/// Best table for this CPU, chosen once. LABELPROP_SIMD=scalar forces the reference path.
const Kernels& active();

}  // namespace labelprop::simd
