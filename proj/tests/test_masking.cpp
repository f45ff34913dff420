#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "labelprop/masking.hpp"
#include "support.hpp"

using namespace labelprop;

TEST_CASE("fixed region mask") {
  const auto zero = fixed_region_mask(3, 4, 0.0, RegionMetric::Chebyshev, 2);
  for (std::size_t j = 0; j < 12; ++j) {
    const auto rows = zero.allowed_rows(j);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0] == j);
    CHECK(rows[1] == 12 + j);
  }

  const auto sat = fixed_region_mask(3, 4, 7.0, RegionMetric::Euclidean, 3);
  CHECK(sat.saturated());
  for (std::size_t j = 0; j < 12; ++j) CHECK(sat.allowed_rows(j).size() == 36);

  const auto nine = fixed_region_mask(3, 3, 1.0, RegionMetric::Chebyshev, 1);
  CHECK_FALSE(nine.saturated());
  CHECK(nine.allowed_rows(4).size() == 9);
  CHECK(nine.allowed_rows(0).size() == 4);

  const auto euc = fixed_region_mask(3, 3, 1.0, RegionMetric::Euclidean, 1);
  CHECK(euc.allowed_rows(4).size() == 5);

  // allowed_rows matches the membership predicate for random radii
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> rad(0.0, 5.0);
  for (int t = 0; t < 20; ++t) {
    const auto metric = t % 2 == 0 ? RegionMetric::Chebyshev : RegionMetric::Euclidean;
    const double r = rad(rng);
    const auto m = fixed_region_mask(4, 5, r, metric, 2);
    for (std::size_t j = 0; j < 20; ++j) {
      std::vector<std::uint32_t> expect;
      for (std::uint32_t i = 0; i < 40; ++i) {
        const double dh = std::abs(static_cast<double>((i % 20) / 5) - static_cast<double>(j / 5));
        const double dw = std::abs(static_cast<double>((i % 20) % 5) - static_cast<double>(j % 5));
        const bool in = metric == RegionMetric::Chebyshev ? std::max(dh, dw) <= r : dh * dh + dw * dw <= r * r;
        CHECK(m.allowed(i, j) == in);
        if (in) expect.push_back(i);
      }
      CHECK(m.allowed_rows(j) == expect);
    }
  }
}

TEST_CASE("coordinate prediction") {
  std::vector<double> onehot(12, 0.0);
  onehot[7] = 1.0;
  const auto p = predict_coordinate(onehot, 4);
  CHECK(p.valid);
  CHECK(p.row == 1.0);
  CHECK(p.col == 3.0);

  const std::vector<double> uniform(4, 0.25);
  const auto c = predict_coordinate(uniform, 2);
  CHECK(c.row == doctest::Approx(0.5));
  CHECK(c.col == doctest::Approx(0.5));

  // rows at u = 0 and u = 4 on a 5x1 grid
  std::vector<double> w(5, 0.0);
  w[0] = 0.75;
  w[4] = 0.25;
  CHECK(predict_coordinate(w, 1).row == doctest::Approx(1.0));

  CHECK_FALSE(predict_coordinate(std::vector<double>(4, 0.0), 2).valid);

  std::mt19937_64 rng(3);
  const auto f = flatten(testing::random_features(rng, 3, 3, 4));
  const auto a = column_softmax(compute_affinity(f, f), 0.5);
  for (const auto& q : predict_coordinates(a, 3, 4)) {
    CHECK(q.valid);
    CHECK(q.row >= 0.0);
    CHECK(q.row <= 2.0);
    CHECK(q.col >= 0.0);
    CHECK(q.col <= 3.0);
  }
}

TEST_CASE("track boxes") {
  // one-hot reverse affinity: previous cell s lands on target cell `dest[s]`
  auto reverse_for = [](std::size_t h, std::size_t w, const std::vector<std::size_t>& dest) {
    const std::size_t n = h * w;
    std::vector<float> v(n * n, 0.0f);
    for (std::size_t s = 0; s < n; ++s) v[dest[s] * n + s] = 1.0f;
    return AffinityBlock(n, n, std::move(v), AffinityState::ColumnNormalized);
  };

  {
    std::vector<std::size_t> dest(64);
    for (std::size_t s = 0; s < 64; ++s) dest[s] = s;
    dest[10] = 3 * 8 + 5;
    LabelMatrix prev(2, 64, 8, 8);
    for (std::size_t s = 0; s < 64; ++s) prev(0, s) = 1.0f;
    prev(0, 10) = 0.0f;
    prev(1, 10) = 1.0f;
    const auto boxes = estimate_track_boxes(reverse_for(8, 8, dest), prev, 0.5, 0.0);
    REQUIRE(boxes.size() == 2);
    CHECK_FALSE(boxes[0].valid);
    CHECK(boxes[1].valid);
    CHECK(boxes[1].row_lo == 3.0);
    CHECK(boxes[1].row_hi == 3.0);
    CHECK(boxes[1].col_lo == 5.0);
    CHECK(boxes[1].col_hi == 5.0);
    const auto ex = boxes_to_exclusions(boxes, 8, 8);
    CHECK(ex.count() == 63);
    CHECK_FALSE(ex.excluded(1, 3 * 8 + 5));
    for (std::size_t j = 0; j < 64; ++j) CHECK_FALSE(ex.excluded(0, j));
  }
  {
    std::vector<std::size_t> dest(36);
    for (std::size_t s = 0; s < 36; ++s) dest[s] = s;
    dest[0] = 1 * 6 + 1;
    dest[1] = 4 * 6 + 3;
    LabelMatrix prev(3, 36, 6, 6);
    prev(1, 0) = 1.0f;
    prev(1, 1) = 0.9f;
    prev(1, 2) = 0.5f;  // not above the threshold
    const auto boxes = estimate_track_boxes(reverse_for(6, 6, dest), prev, 0.5, 1.0);
    CHECK(boxes[1].valid);
    CHECK(boxes[1].row_lo == 0.0);
    CHECK(boxes[1].row_hi == 5.0);
    CHECK(boxes[1].col_lo == 0.0);
    CHECK(boxes[1].col_hi == 4.0);
    CHECK_FALSE(boxes[2].valid);  // class absent: full frame
    const auto ex = boxes_to_exclusions(boxes, 6, 6);
    for (std::size_t j = 0; j < 36; ++j) CHECK_FALSE(ex.excluded(2, j));
    CHECK(ex.count() == 6);  // column 5 of class 1
  }
}

TEST_CASE("track boxes grow with the margin") {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 10; ++t) {
    const auto f = flatten(testing::random_features(rng, 4, 5, 5));
    const auto g = flatten(testing::random_features(rng, 4, 5, 5));
    const auto reverse = column_softmax(compute_affinity(g, f), 0.2);
    const LabelMatrix prev(testing::random_onehot(rng, 3, 5, 5));
    const auto small = estimate_track_boxes(reverse, prev, 0.5, 0.5);
    const auto large = estimate_track_boxes(reverse, prev, 0.5, 1.5);
    for (std::size_t l = 1; l < 3; ++l) {
      if (!small[l].valid) continue;
      CHECK(large[l].row_lo <= small[l].row_lo);
      CHECK(large[l].row_hi >= small[l].row_hi);
      CHECK(large[l].col_lo <= small[l].col_lo);
      CHECK(large[l].col_hi >= small[l].col_hi);
    }
  }
}

TEST_CASE("exclusions match per-cell membership") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> c(0.0, 4.0);
  for (int t = 0; t < 20; ++t) {
    TrackBoxBuilder builder(3);
    for (int i = 0; i < 3; ++i) builder.add(1 + static_cast<std::size_t>(i % 2), GridPoint{c(rng), c(rng), true});
    const auto boxes = builder.finish(5, 5, 0.7);
    const auto ex = boxes_to_exclusions(boxes, 5, 5);
    for (std::size_t l = 0; l < 3; ++l)
      for (std::size_t j = 0; j < 25; ++j) {
        const auto r = static_cast<double>(j / 5), col = static_cast<double>(j % 5);
        const bool inside = !boxes[l].valid || (r >= boxes[l].row_lo && r <= boxes[l].row_hi &&
                                                col >= boxes[l].col_lo && col <= boxes[l].col_hi);
        CHECK(ex.excluded(l, j) == !inside);
      }
  }
}
