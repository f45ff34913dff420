#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "labelprop/errors.hpp"
#include "labelprop/grid.hpp"
#include "support.hpp"

using namespace labelprop;

TEST_CASE("flatten follows raster order") {
  FeatureGrid one(1, 1, 1, {0.5f});
  const auto m1 = flatten(one);
  CHECK(m1.cols() == 1);
  CHECK(m1(0, 0) == 0.5f);

  // values [[a,b],[c,d]] over C=2, H=1, W=2
  FeatureGrid g(2, 1, 2, {1.0f, 2.0f, 3.0f, 4.0f});
  const auto m = flatten(g);
  CHECK(m(0, 0) == 1.0f);
  CHECK(m(1, 0) == 3.0f);
  CHECK(m(0, 1) == 2.0f);
  CHECK(m(1, 1) == 4.0f);
  const auto lm = m.location_major();
  CHECK(lm == std::vector<float>{1.0f, 3.0f, 2.0f, 4.0f});
}

TEST_CASE("flatten and unflatten round trip bitwise") {
  std::mt19937_64 rng(3);
  const auto g = testing::random_features(rng, 3, 4, 5);
  CHECK(unflatten(flatten(g)) == g);
}

TEST_CASE("feature grid rejects bad input") {
  CHECK_THROWS_AS(FeatureGrid(2, 2, 2, std::vector<float>(7)), ConfigError);
  CHECK_THROWS_AS(FeatureGrid(1, 1, 1, {std::numeric_limits<float>::quiet_NaN()}), ConfigError);
}

TEST_CASE("l2 normalize") {
  FeatureMatrix m(2, 2, 1, 2, {3.0f, 0.0f, 4.0f, 0.0f});
  const auto n = l2_normalize(m);
  CHECK(n.normalized());
  CHECK(n(0, 0) == doctest::Approx(0.6));
  CHECK(n(1, 0) == doctest::Approx(0.8));
  CHECK(n(0, 1) == 0.0f);
  CHECK(n(1, 1) == 0.0f);

  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto g = testing::random_features(rng, 6, 3, 4);
    const double c = std::uniform_real_distribution<double>(0.01, 100.0)(rng);
    std::vector<float> scaled(g.values().begin(), g.values().end());
    for (auto& v : scaled) v = static_cast<float>(v * c);
    const auto a = l2_normalize(flatten(g));
    const auto b = l2_normalize(flatten(FeatureGrid(6, 3, 4, scaled)));
    CHECK(testing::max_abs_diff(a.values(), b.values()) <= 1e-6);
    const auto twice = l2_normalize(FeatureMatrix(a.channels(), a.cols(), 3, 4,
                                                  std::vector<float>(a.values().begin(), a.values().end())));
    CHECK(testing::max_abs_diff(a.values(), twice.values()) <= 1e-7);
  }
}

TEST_CASE("resize scores") {
  std::mt19937_64 rng(5);
  const auto z = testing::random_soft(rng, 2, 3, 4);
  CHECK(resize_scores(z, 3, 4) == z);

  LabelGrid c(1, 2, 3, std::vector<float>(6, 0.7f));
  const auto resized = resize_scores(c, 7, 5);
  for (float v : resized.scores()) CHECK(v == doctest::Approx(0.7).epsilon(1e-6));

  LabelGrid p(1, 2, 2, {0.0f, 1.0f, 0.0f, 1.0f});
  const auto up = resize_scores(p, 2, 4);
  for (std::size_t h = 0; h < 2; ++h) {
    CHECK(up.at(0, h, 0) == doctest::Approx(0.0));
    CHECK(up.at(0, h, 1) == doctest::Approx(1.0 / 3.0));
    CHECK(up.at(0, h, 2) == doctest::Approx(2.0 / 3.0));
    CHECK(up.at(0, h, 3) == doctest::Approx(1.0));
  }

  const auto big = resize_scores(z, 9, 13);
  for (std::size_t l = 0; l < 2; ++l) {
    const auto src = z.plane(l);
    const auto [lo, hi] = std::minmax_element(src.begin(), src.end());
    for (float v : big.plane(l)) {
      CHECK(v >= *lo);
      CHECK(v <= *hi);
    }
  }
}

TEST_CASE("argmax labels") {
  LabelGrid z(3, 1, 3, {0.2f, 1.0f / 3, 0.0f, 0.5f, 1.0f / 3, 1.0f, 0.3f, 1.0f / 3, 0.0f});
  const auto m = argmax_labels(z);
  CHECK(m.at(0, 0) == 1);
  CHECK(m.at(0, 1) == 0);  // tie resolves to lowest id
  CHECK(m.at(0, 2) == 1);

  std::mt19937_64 rng(2);
  const auto oh = testing::random_onehot(rng, 4, 5, 6);
  const auto map = argmax_labels(oh);
  CHECK(onehot_downsample(map, 5, 6, 4) == oh);
}

TEST_CASE("onehot downsample") {
  ClassMap uniform(8, 8, 3);
  const auto g = onehot_downsample(uniform, 2, 2);
  CHECK(g.classes() == 4);
  for (std::size_t h = 0; h < 2; ++h)
    for (std::size_t w = 0; w < 2; ++w) {
      CHECK(g.at(3, h, w) == 1.0f);
      CHECK(g.at(0, h, w) == 0.0f);
    }

  ClassMap checker(4, 4);
  for (std::size_t h = 0; h < 4; ++h)
    for (std::size_t w = 0; w < 4; ++w) checker.at(h, w) = static_cast<std::int32_t>((h + w) % 2);
  const auto d = nearest_resize(checker, 2, 2);
  // cell centres of a 2x2 grid over 4x4 pixels sample pixel (1,1), (1,3), (3,1), (3,3)
  for (std::size_t h = 0; h < 2; ++h)
    for (std::size_t w = 0; w < 2; ++w) CHECK(d.at(h, w) == checker.at(2 * h + 1, 2 * w + 1));
}

TEST_CASE("keypoints to label grid and back") {
  KeypointSet kp;
  kp.points.push_back({0, 3.0, 2.0, true});
  const auto g = keypoints_to_labelgrid(kp, 5, 5);
  CHECK(g.classes() == 1);
  CHECK(g.at(0, 2, 3) == 1.0f);
  CHECK(label_mass(g) == doctest::Approx(1.0 / 25.0));

  const auto empty = keypoints_to_labelgrid(KeypointSet{}, 3, 3);
  for (float v : empty.scores()) CHECK(v == 0.0f);

  KeypointSet clash;
  clash.points.push_back({0, 1.2, 1.1, true});
  clash.points.push_back({1, 0.9, 0.8, true});
  const auto c = keypoints_to_labelgrid(clash, 4, 4);
  CHECK(c.at(0, 1, 1) == 1.0f);
  CHECK(c.at(1, 1, 1) == 1.0f);

  KeypointSet far;
  far.points.push_back({0, 10.0, -2.0, true});
  std::vector<std::string> warnings;
  const auto f = keypoints_to_labelgrid(far, 4, 4, &warnings);
  CHECK(f.at(0, 0, 3) == 1.0f);
  CHECK(warnings.size() == 1);

  KeypointSet many;
  many.points.push_back({0, 1.0, 0.0, true});
  many.points.push_back({1, 2.0, 3.0, true});
  many.points.push_back({2, 0.0, 2.0, false});
  const auto back = labelgrid_to_keypoints(keypoints_to_labelgrid(many, 4, 4));
  REQUIRE(back.points.size() == 3);
  CHECK(back.points[0].x == 1.0);
  CHECK(back.points[0].y == 0.0);
  CHECK(back.points[1].x == 2.0);
  CHECK(back.points[1].y == 3.0);
  CHECK_FALSE(back.points[2].visible);

  LabelGrid tie(1, 2, 2, {0.4f, 0.0f, 0.0f, 0.4f});
  const auto t = labelgrid_to_keypoints(tie);
  CHECK(t.points[0].x == 0.0);
  CHECK(t.points[0].y == 0.0);
}
