#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "labelprop/grid.hpp"

namespace labelprop::testing {

inline FeatureGrid random_features(std::mt19937_64& rng, std::size_t c, std::size_t h, std::size_t w) {
  std::normal_distribution<float> d(0.0f, 1.0f);
  std::vector<float> v(c * h * w);
  for (auto& x : v) x = d(rng);
  return FeatureGrid(c, h, w, std::move(v));
}

inline LabelGrid random_onehot(std::mt19937_64& rng, std::size_t l, std::size_t h, std::size_t w) {
  std::uniform_int_distribution<std::size_t> d(0, l - 1);
  LabelGrid g(l, h, w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) g.at(d(rng), y, x) = 1.0f;
  return g;
}

inline LabelGrid random_soft(std::mt19937_64& rng, std::size_t l, std::size_t h, std::size_t w) {
  std::uniform_real_distribution<float> d(0.0f, 1.0f);
  LabelGrid g(l, h, w);
  for (auto& v : g.scores()) v = d(rng);
  return g;
}

inline BinaryMask random_mask(std::mt19937_64& rng, std::size_t h, std::size_t w, double p = 0.4) {
  std::bernoulli_distribution d(p);
  BinaryMask m(h, w);
  for (auto& b : m.bits) b = d(rng) ? 1 : 0;
  return m;
}

// Random blob-like mask: union of a few rectangles.
inline BinaryMask random_blobs(std::mt19937_64& rng, std::size_t h, std::size_t w, int count = 3) {
  BinaryMask m(h, w);
  std::uniform_int_distribution<std::size_t> ry(0, h - 1), rx(0, w - 1);
  for (int i = 0; i < count; ++i) {
    std::size_t y0 = ry(rng), y1 = ry(rng), x0 = rx(rng), x1 = rx(rng);
    if (y0 > y1) std::swap(y0, y1);
    if (x0 > x1) std::swap(x0, x1);
    for (std::size_t y = y0; y <= y1; ++y)
      for (std::size_t x = x0; x <= x1; ++x) m.set(y, x, true);
  }
  return m;
}

inline double max_abs_diff(std::span<const float> a, std::span<const float> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
  return m;
}

}  // namespace labelprop::testing
