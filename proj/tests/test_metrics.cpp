#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>

#include "labelprop/errors.hpp"
#include "labelprop/metrics.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace labelprop;

namespace {

BinaryMask rect(std::size_t h, std::size_t w, std::size_t y0, std::size_t x0, std::size_t rh, std::size_t rw) {
  BinaryMask m(h, w);
  for (std::size_t y = y0; y < y0 + rh; ++y)
    for (std::size_t x = x0; x < x0 + rw; ++x) m.set(y, x, true);
  return m;
}

}  // namespace

TEST_CASE("jaccard") {
  const auto a = rect(4, 4, 0, 0, 2, 2);
  CHECK(jaccard(a, a) == 1.0);
  CHECK(jaccard(a, rect(4, 4, 2, 2, 2, 2)) == 0.0);
  CHECK(jaccard(BinaryMask(4, 4), BinaryMask(4, 4)) == 1.0);
  // 8 + 8 pixels sharing 4: union 12
  CHECK(jaccard(rect(4, 4, 0, 0, 2, 4), rect(4, 4, 1, 0, 2, 4)) == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(jaccard(a, BinaryMask(3, 4)), DataError);

  std::mt19937_64 rng(1);
  for (int t = 0; t < 100; ++t) {
    const auto p = testing::random_mask(rng, 7, 9);
    const auto g = testing::random_mask(rng, 7, 9);
    CHECK(jaccard(p, g) == testing::jaccard_oracle(p, g));
    CHECK(jaccard(p, g) == jaccard(g, p));
  }
}

TEST_CASE("boundary pixels include the image border") {
  BinaryMask full(3, 3);
  std::fill(full.bits.begin(), full.bits.end(), 1);
  const auto b = boundary_pixels(full);
  CHECK_FALSE(b.at(1, 1));
  CHECK(std::count(b.bits.begin(), b.bits.end(), 1) == 8);
}

TEST_CASE("boundary F") {
  const auto gt = rect(20, 20, 5, 5, 6, 6);
  CHECK(boundary_f(gt, gt, 0.0) == 1.0);
  CHECK(boundary_f(BinaryMask(20, 20), BinaryMask(20, 20), 1.0) == 1.0);
  CHECK(boundary_f(gt, BinaryMask(20, 20), 1.0) == 0.0);
  CHECK(boundary_f(BinaryMask(20, 20), gt, 1.0) == 0.0);

  for (std::size_t s = 0; s <= 3; ++s) {
    const auto shifted = rect(20, 20, 5 + s, 5, 6, 6);
    CHECK(boundary_f(shifted, gt, static_cast<double>(s)) == 1.0);
    const auto diag = rect(20, 20, 5 + s, 5 + s, 6, 6);
    CHECK(boundary_f(diag, gt, static_cast<double>(s) * std::sqrt(2.0) + 1e-9) == 1.0);
  }

  const auto moved = rect(20, 20, 8, 5, 6, 6);
  const double f = boundary_f(moved, gt, 1.0);
  CHECK(std::abs(f - testing::boundary_f_oracle(moved, gt, 1.0)) <= 1e-9);
  CHECK(f > 0.0);
  CHECK(f < 1.0);

  std::mt19937_64 rng(2);
  for (int t = 0; t < 100; ++t) {
    const auto p = t % 2 ? testing::random_blobs(rng, 12, 14) : testing::random_mask(rng, 12, 14, 0.5);
    const auto g = testing::random_blobs(rng, 12, 14);
    const double tol = static_cast<double>(t % 4) * 0.75;
    CHECK(std::abs(boundary_f(p, g, tol) - testing::boundary_f_oracle(p, g, tol)) <= 1e-9);
    CHECK(boundary_f(p, g, tol) == boundary_f(g, p, tol));
    CHECK(boundary_f(p, p, tol) == 1.0);
  }
  CHECK(default_boundary_tolerance(480, 854) == std::ceil(0.008 * std::sqrt(480.0 * 480.0 + 854.0 * 854.0)));
}

TEST_CASE("recall over threshold") {
  const std::vector<double> ones{1.0, 1.0};
  CHECK(recall_over_threshold(ones) == 1.0);
  const std::vector<double> mixed{0.4, 0.6};
  CHECK(recall_over_threshold(mixed, 0.5) == 0.5);
  const std::vector<double> half{0.5};
  CHECK(recall_over_threshold(half, 0.5) == 0.0);
  CHECK_THROWS_AS(recall_over_threshold(std::vector<double>{}), DataError);
}

TEST_CASE("davis aggregation") {
  const std::vector<SequenceScore> one{{"a", 1, 1.0, 1.0}};
  const auto r1 = davis_aggregate(one);
  CHECK(r1.j_mean == 1.0);
  CHECK(r1.f_mean == 1.0);
  CHECK(r1.j_recall == 1.0);
  CHECK(r1.jf_mean == 1.0);

  const std::vector<SequenceScore> two{{"a", 1, 0.4, 0.2}, {"b", 1, 0.6, 0.9}};
  const auto r2 = davis_aggregate(two);
  CHECK(r2.j_mean == doctest::Approx(0.5));
  CHECK(r2.j_recall == 0.5);

  std::vector<SequenceScore> three{{"a", 1, 0.9, 0.8}, {"a", 2, 0.3, 0.45}, {"b", 1, 0.6, 0.7}};
  const auto r3 = davis_aggregate(three);
  CHECK(r3.j_mean == doctest::Approx(0.6));
  CHECK(r3.f_mean == doctest::Approx(0.65));
  CHECK(r3.j_recall == doctest::Approx(2.0 / 3.0));
  CHECK(r3.f_recall == doctest::Approx(2.0 / 3.0));
  CHECK(std::abs(r3.jf_mean - 0.5 * (r3.j_mean + r3.f_mean)) <= 1e-9);
  const auto seq = davis_aggregate(three, DavisAveraging::PerSequence);
  CHECK(seq.j_mean == doctest::Approx(0.5 * (0.6 + 0.6)));
  CHECK(seq.f_mean == doctest::Approx(0.5 * (0.625 + 0.7)));

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<SequenceScore> many;
  for (int i = 0; i < 30; ++i) many.push_back({"s" + std::to_string(i % 7), i, u(rng), u(rng)});
  const auto base = davis_aggregate(many);
  std::shuffle(many.begin(), many.end(), rng);
  const auto again = davis_aggregate(many);
  CHECK(base.j_mean == again.j_mean);
  CHECK(base.f_mean == again.f_mean);
}

TEST_CASE("pck") {
  KeypointSet gt;
  for (int i = 0; i < 4; ++i) gt.points.push_back({i, 10.0 * i, 5.0, true});
  CHECK(pck(gt, gt, 0.1, 10.0) == 1.0);

  KeypointSet far = gt;
  for (auto& p : far.points) p.x += 50.0;
  CHECK(pck(far, gt, 0.1, 10.0) == 0.0);

  KeypointSet half = gt;
  half.points[0].x += 0.5;
  half.points[1].y -= 0.9;
  half.points[2].x += 3.0;
  half.points[3].visible = false;
  CHECK(pck(half, gt, 0.1, 10.0) == 0.5);
  CHECK(pck(KeypointSet{}, gt, 0.1, 10.0) == 0.0);
  CHECK(pck_bbox_norm(gt) == 30.0);

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> pos(0.0, 20.0);
  std::bernoulli_distribution vis(0.8);
  for (int t = 0; t < 100; ++t) {
    KeypointSet a, b;
    for (int i = 0; i < 6; ++i) {
      a.points.push_back({i, pos(rng), pos(rng), vis(rng)});
      b.points.push_back({i, pos(rng), pos(rng), vis(rng)});
    }
    double prev = -1.0;
    for (double alpha : {0.05, 0.1, 0.2, 0.5}) {
      const double v = pck(a, b, alpha, 20.0);
      CHECK(v == testing::pck_oracle(a, b, alpha, 20.0));
      CHECK(v >= prev);
      prev = v;
    }
  }
}

TEST_CASE("miou") {
  ClassMap m(2, 3);
  m.ids = {0, 1, 2, 2, 1, 0};
  CHECK(miou(m, m, 3) == 1.0);

  ClassMap bg(2, 2, 0);
  ClassMap g1(2, 2, 0);
  g1.at(0, 0) = 1;
  IouAccumulator acc(2);
  acc.add(bg, g1);
  CHECK(acc.iou(1) == 0.0);
  CHECK(acc.iou(0) == doctest::Approx(0.75));

  ClassMap p4(4, 4, 0), t4(4, 4, 0);
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x) {
      p4.at(y, x) = x < 2 ? 1 : 0;
      t4.at(y, x) = x < 3 && y < 2 ? 1 : 0;
    }
  // class 1: intersection 4, union 10; class 0: intersection 6, union 12
  CHECK(miou(p4, t4, 2) == doctest::Approx(0.5 * (0.4 + 0.5)));

  ClassMap ig(1, 2);
  ig.ids = {255, 1};
  ClassMap ip(1, 2);
  ip.ids = {0, 1};
  CHECK(miou(ip, ig, 2, {255}) == 1.0);

  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::int32_t> cls(0, 3);
  for (int t = 0; t < 100; ++t) {
    ClassMap a(5, 6), b(5, 6);
    for (auto& v : a.ids) v = cls(rng);
    for (auto& v : b.ids) v = cls(rng);
    CHECK(miou(a, b, 4) == testing::miou_oracle(a, b, 4));
  }
}
