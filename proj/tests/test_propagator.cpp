#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "labelprop/brute_force.hpp"
#include "labelprop/errors.hpp"
#include "labelprop/propagator.hpp"
#include "support.hpp"

using namespace labelprop;

namespace {

PropagationConfig config(Aggregation agg, LocalizationMode loc, SoftmaxOrder order = SoftmaxOrder::BeforeMask) {
  PropagationConfig cfg;
  cfg.aggregation = agg;
  cfg.localization.mode = loc;
  cfg.localization.radius = 1.5;
  cfg.softmax_order = order;
  cfg.temperature = 0.2;
  cfg.k = 4;
  cfg.context = 3;
  return cfg;
}

double max_diff(const std::vector<LabelGrid>& a, const std::vector<LabelGrid>& b) {
  REQUIRE(a.size() == b.size());
  double m = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) m = std::max(m, testing::max_abs_diff(a[t].scores(), b[t].scores()));
  return m;
}

}  // namespace

TEST_CASE("config validation") {
  PropagationConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.temperature = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.k = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.aggregation = Aggregation::Overall;
  cfg.localization.mode = LocalizationMode::Track;
  CHECK_THROWS_WITH_AS(cfg.validate(), "track localization requires per_frame aggregation", ConfigError);
  cfg.aggregation = Aggregation::PerFrame;
  cfg.softmax_order = SoftmaxOrder::AfterMask;
  CHECK_THROWS_WITH_AS(cfg.validate(), "track localization requires softmax_order before_mask", ConfigError);
  cfg = {};
  cfg.include_first = false;
  cfg.context = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK(describe(Localization{}) == "none");
}

TEST_CASE("context buffer keeps the anchor and the latest frames") {
  auto frame = [](float v) {
    return std::pair{FeatureMatrix(1, 1, 1, 1, {v}), LabelMatrix(1, 1, 1, 1, {v})};
  };
  ContextBuffer buf(2, true);
  auto [f0, l0] = frame(0.0f);
  buf.start(f0, l0);
  CHECK(buf.size() == 1);
  for (int i = 1; i <= 4; ++i) {
    auto [f, l] = frame(static_cast<float>(i));
    buf.push(f, l);
  }
  const auto frames = buf.frames();
  REQUIRE(frames.size() == 3);
  CHECK(frames[0]->labels(0, 0) == 0.0f);
  CHECK(frames[1]->labels(0, 0) == 3.0f);
  CHECK(frames[2]->labels(0, 0) == 4.0f);

  ContextBuffer plain(2, false);
  plain.start(f0, l0);
  CHECK_FALSE(plain.has_anchor());
  for (int i = 1; i <= 2; ++i) {
    auto [f, l] = frame(static_cast<float>(i));
    plain.push(f, l);
  }
  CHECK(plain.size() == 2);
  CHECK(plain.frames()[0]->labels(0, 0) == 1.0f);

  ContextBuffer anchor_only(0, true);
  anchor_only.start(f0, l0);
  auto [f1, l1] = frame(1.0f);
  anchor_only.push(f1, l1);
  CHECK(anchor_only.size() == 1);

  ContextBuffer other(1, true);
  other.start(f0, l0);
  CHECK_THROWS_AS(other.push(FeatureMatrix(2, 1, 1, 1, {1.0f, 2.0f}), l1), ConfigError);
}

TEST_CASE("self match reproduces labels") {
  std::mt19937_64 rng(1);
  const auto f = l2_normalize(flatten(testing::random_features(rng, 8, 4, 4)));
  const LabelMatrix y(testing::random_onehot(rng, 3, 4, 4));
  for (auto agg : {Aggregation::Overall, Aggregation::PerFrame}) {
    for (double t : {0.01, 1.0, 10.0}) {
      PropagationConfig cfg;
      cfg.aggregation = agg;
      cfg.k = 1;
      cfg.temperature = t;
      ContextBuffer buf(0, true);
      buf.start(f, y);
      const auto z = propagate_step(buf, f, cfg);
      if (agg == Aggregation::Overall) {
        CHECK(z == y);
      } else {
        // per-frame weights are softmax values, so only the class ordering survives
        CHECK(argmax_labels(z.to_grid()) == argmax_labels(y.to_grid()));
      }
    }
  }
}

TEST_CASE("zero labels give zero output") {
  std::mt19937_64 rng(2);
  const auto f = l2_normalize(flatten(testing::random_features(rng, 4, 3, 3)));
  const auto g = l2_normalize(flatten(testing::random_features(rng, 4, 3, 3)));
  for (auto agg : {Aggregation::Overall, Aggregation::PerFrame}) {
    ContextBuffer buf(1, true);
    buf.start(f, LabelMatrix(2, 9, 3, 3));
    const auto z = propagate_step(buf, g, config(agg, LocalizationMode::None));
    for (float v : z.scores()) CHECK(v == 0.0f);
  }
}

TEST_CASE("video of one frame returns the initial labels") {
  std::mt19937_64 rng(3);
  const std::vector<FeatureGrid> fs{testing::random_features(rng, 3, 2, 2)};
  const auto init = testing::random_onehot(rng, 2, 2, 2);
  const auto out = propagate_video(fs, init, PropagationConfig{});
  REQUIRE(out.size() == 1);
  CHECK(out[0] == init);
}

TEST_CASE("output stays within the unit interval and is worker independent") {
  std::mt19937_64 rng(4);
  std::vector<FeatureGrid> fs;
  for (int t = 0; t < 5; ++t) fs.push_back(testing::random_features(rng, 6, 5, 7));
  const auto init = testing::random_onehot(rng, 3, 5, 7);
  for (auto loc : {LocalizationMode::None, LocalizationMode::FixedRegion, LocalizationMode::Track}) {
    for (auto agg : {Aggregation::Overall, Aggregation::PerFrame}) {
      if (loc == LocalizationMode::Track && agg == Aggregation::Overall) continue;
      const auto cfg = config(agg, loc);
      const auto one = propagate_video(fs, init, cfg, {1, nullptr});
      const auto four = propagate_video(fs, init, cfg, {4, nullptr});
      const auto scalar = propagate_video(fs, init, cfg, {3, &simd::scalar_kernels()});
      CHECK(max_diff(one, four) == 0.0);
      CHECK(max_diff(one, scalar) <= 1e-5);
      for (const auto& g : one)
        for (float v : g.scores()) {
          CHECK(v >= 0.0f);
          CHECK(v <= 1.0f);
        }
    }
  }
}

TEST_CASE("saturated fixed region is a no-op") {
  std::mt19937_64 rng(5);
  std::vector<FeatureGrid> fs;
  for (int t = 0; t < 4; ++t) fs.push_back(testing::random_features(rng, 5, 4, 4));
  const auto init = testing::random_onehot(rng, 3, 4, 4);
  for (auto agg : {Aggregation::Overall, Aggregation::PerFrame}) {
    auto cfg = config(agg, LocalizationMode::None);
    const auto base = propagate_video(fs, init, cfg);
    cfg.localization.mode = LocalizationMode::FixedRegion;
    cfg.localization.radius = 8.0;
    CHECK(max_diff(base, propagate_video(fs, init, cfg)) == 0.0);
  }
}

TEST_CASE("anchor-only context matches the first frame") {
  std::mt19937_64 rng(6);
  std::vector<FeatureGrid> fs;
  for (int t = 0; t < 4; ++t) fs.push_back(testing::random_features(rng, 5, 3, 3));
  const auto init = testing::random_onehot(rng, 2, 3, 3);
  PropagationConfig cfg = config(Aggregation::Overall, LocalizationMode::None);
  cfg.context = 0;
  const auto out = propagate_video(fs, init, cfg);
  for (std::size_t t = 1; t < fs.size(); ++t) {
    ContextBuffer buf(0, true);
    buf.start(l2_normalize(flatten(fs[0])), LabelMatrix(init));
    CHECK(propagate_step(buf, l2_normalize(flatten(fs[t])), cfg).to_grid() == out[t]);
  }
}

TEST_CASE("random small instances match the dense reference") {
  std::mt19937_64 rng(7);
  for (auto agg : {Aggregation::Overall, Aggregation::PerFrame}) {
    for (auto loc : {LocalizationMode::None, LocalizationMode::FixedRegion, LocalizationMode::Track}) {
      for (auto order : {SoftmaxOrder::BeforeMask, SoftmaxOrder::AfterMask}) {
        if (loc == LocalizationMode::Track && (agg == Aggregation::Overall || order == SoftmaxOrder::AfterMask))
          continue;
        std::vector<FeatureGrid> fs;
        for (int t = 0; t < 6; ++t) fs.push_back(testing::random_features(rng, 5, 4, 4));
        const auto init = testing::random_onehot(rng, 3, 4, 4);
        const auto cfg = config(agg, loc, order);
        CAPTURE(to_string(agg));
        CAPTURE(to_string(loc));
        CAPTURE(to_string(order));
        CHECK(max_diff(propagate_video(fs, init, cfg), oracle::brute_force_propagate(fs, init, cfg)) <= 1e-5);
      }
    }
  }
}

TEST_CASE("dense reference refuses large grids") {
  std::mt19937_64 rng(8);
  const std::vector<FeatureGrid> fs{testing::random_features(rng, 2, 9, 8)};
  CHECK_THROWS_AS(oracle::brute_force_propagate(fs, testing::random_onehot(rng, 2, 9, 8), PropagationConfig{}),
                  ConfigError);
}

TEST_CASE("dense affinity path agrees with the feature path") {
  std::mt19937_64 rng(9);
  const auto f0 = l2_normalize(flatten(testing::random_features(rng, 4, 3, 4)));
  const auto f1 = l2_normalize(flatten(testing::random_features(rng, 4, 3, 4)));
  const auto g = l2_normalize(flatten(testing::random_features(rng, 4, 3, 4)));
  const LabelMatrix y0(testing::random_onehot(rng, 3, 3, 4));
  const LabelMatrix y1(testing::random_soft(rng, 3, 3, 4));
  ContextBuffer buf(1, true);
  buf.start(f0, y0);
  buf.push(f1, y1);
  for (auto loc : {LocalizationMode::None, LocalizationMode::FixedRegion, LocalizationMode::Track}) {
    const auto cfg = config(Aggregation::PerFrame, loc);
    const auto expect = propagate_step(buf, g, cfg);
    DenseAffinity dense({compute_affinity(f0, g), compute_affinity(f1, g)});
    const std::vector<const LabelMatrix*> labels{&y0, &y1};
    const auto got = propagate_affinity(dense, labels, 3, 4, cfg);
    CHECK(testing::max_abs_diff(expect.scores(), got.scores()) <= 1e-6);
  }
}

TEST_CASE("label mass trace") {
  std::mt19937_64 rng(10);
  const std::vector<LabelGrid> onehot{testing::random_onehot(rng, 3, 2, 2), testing::random_onehot(rng, 3, 2, 2)};
  for (double v : label_mass_trace(onehot)) CHECK(v == doctest::Approx(1.0));
  const std::vector<LabelGrid> zero{LabelGrid(2, 2, 2)};
  CHECK(label_mass_trace(zero)[0] == 0.0);
  CHECK_THROWS_AS(label_mass_trace({}), ConfigError);
}
