#include "labelprop/brute_force.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "labelprop/errors.hpp"

// Deliberately naive: dense matrices, explicit masks, full sorts. Shares no code with the
// propagation engine beyond the grid containers.

namespace labelprop::oracle {
namespace {

using Matrix = std::vector<std::vector<double>>;  // [row][col]

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::vector<std::vector<double>> columns_of(const FeatureGrid& g, bool normalize) {
  const std::size_t n = g.cells();
  std::vector<std::vector<double>> cols(n, std::vector<double>(g.channels()));
  for (std::size_t j = 0; j < n; ++j) {
    double norm = 0.0;
    for (std::size_t c = 0; c < g.channels(); ++c) {
      cols[j][c] = g.values()[c * n + j];
      norm += cols[j][c] * cols[j][c];
    }
    norm = std::sqrt(norm);
    if (normalize && norm > 0.0)
      for (auto& v : cols[j]) v = static_cast<double>(static_cast<float>(v / norm));
  }
  return cols;
}

Matrix affinity(const std::vector<std::vector<double>>& ctx, const std::vector<std::vector<double>>& tgt) {
  Matrix a(ctx.size(), std::vector<double>(tgt.size()));
  for (std::size_t i = 0; i < ctx.size(); ++i)
    for (std::size_t j = 0; j < tgt.size(); ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < ctx[i].size(); ++c) s += ctx[i][c] * tgt[j][c];
      a[i][j] = static_cast<double>(static_cast<float>(s));  // stored as 32-bit
    }
  return a;
}

std::vector<double> softmax(const std::vector<double>& v, double t) {
  double peak = kNegInf;
  for (double x : v) peak = std::max(peak, x);
  std::vector<double> out(v.size(), 0.0);
  if (peak == kNegInf) return out;
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = v[i] == kNegInf ? 0.0 : std::exp((v[i] - peak) / t);
    total += out[i];
  }
  for (auto& x : out) x /= total;
  return out;
}

// Indices of the k largest entries (ties to the lower index), skipping -inf.
std::vector<std::size_t> top_k(const std::vector<double>& v, std::size_t k) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (v[i] != kNegInf) idx.push_back(i);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
  if (idx.size() > k) idx.resize(k);
  return idx;
}

bool region_allows(std::size_t ctx_cell, std::size_t tgt_cell, std::size_t width, const Localization& loc) {
  if (loc.mode != LocalizationMode::FixedRegion) return true;
  const double dh = std::abs(static_cast<double>(ctx_cell / width) - static_cast<double>(tgt_cell / width));
  const double dw = std::abs(static_cast<double>(ctx_cell % width) - static_cast<double>(tgt_cell % width));
  if (loc.metric == RegionMetric::Chebyshev) return std::max(dh, dw) <= loc.radius;
  return dh * dh + dw * dw <= loc.radius * loc.radius;
}

// allowed[l][j]: class l may be non-zero at target cell j.
std::vector<std::vector<bool>> track_allowed(const Matrix& prev_to_target, const LabelGrid& prev, std::size_t height,
                                             std::size_t width, const PropagationConfig& cfg) {
  const std::size_t n = height * width;
  const std::size_t classes = prev.classes();
  std::vector<std::vector<bool>> allowed(classes, std::vector<bool>(n, true));
  const double theta = cfg.localization.track_threshold;
  const double m = cfg.localization.track_margin;
  for (std::size_t l = 1; l < classes; ++l) {
    double r0 = std::numeric_limits<double>::infinity(), r1 = -r0, c0 = r0, c1 = -r0;
    bool any = false;
    for (std::size_t s = 0; s < n; ++s) {
      if (!(prev.scores()[l * n + s] > theta)) continue;
      const auto w = softmax(prev_to_target[s], cfg.temperature);
      double total = 0.0, pr = 0.0, pc = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        total += w[j];
        pr += w[j] * static_cast<double>(j / width);
        pc += w[j] * static_cast<double>(j % width);
      }
      if (total <= 0.0) continue;
      pr /= total;
      pc /= total;
      r0 = std::min(r0, pr);
      r1 = std::max(r1, pr);
      c0 = std::min(c0, pc);
      c1 = std::max(c1, pc);
      any = true;
    }
    if (!any) continue;
    const double hmax = static_cast<double>(height) - 1.0;
    const double wmax = static_cast<double>(width) - 1.0;
    r0 = std::clamp(r0 - m, 0.0, hmax);
    r1 = std::clamp(r1 + m, 0.0, hmax);
    c0 = std::clamp(c0 - m, 0.0, wmax);
    c1 = std::clamp(c1 + m, 0.0, wmax);
    for (std::size_t j = 0; j < n; ++j) {
      const auto r = static_cast<double>(j / width);
      const auto c = static_cast<double>(j % width);
      allowed[l][j] = r >= r0 && r <= r1 && c >= c0 && c <= c1;
    }
  }
  return allowed;
}

}  // namespace

LabelGrid brute_force_step(std::span<const FeatureGrid> context, std::span<const LabelGrid> labels,
                           const FeatureGrid& target, const PropagationConfig& cfg) {
  cfg.validate();
  if (context.empty() || context.size() != labels.size())
    throw ConfigError("brute_force_step: need one label grid per context frame");
  const std::size_t H = target.height();
  const std::size_t W = target.width();
  const std::size_t n = H * W;
  if (n > kMaxCells) throw ConfigError("brute_force_step: grid too large for the dense reference");
  const std::size_t classes = labels.front().classes();
  const std::size_t frames = context.size();

  const auto tgt = columns_of(target, false);
  std::vector<Matrix> blocks;
  for (const auto& g : context) blocks.push_back(affinity(columns_of(g, false), tgt));

  std::vector<double> out(classes * n, 0.0);
  const Localization& loc = cfg.localization;

  if (cfg.aggregation == Aggregation::Overall) {
    for (std::size_t j = 0; j < n; ++j) {
      std::vector<double> col(frames * n);
      for (std::size_t f = 0; f < frames; ++f)
        for (std::size_t i = 0; i < n; ++i) col[f * n + i] = region_allows(i, j, W, loc) ? blocks[f][i][j] : kNegInf;
      const auto idx = top_k(col, cfg.k);
      std::vector<double> vals;
      for (auto i : idx) vals.push_back(col[i]);
      const auto w = softmax(vals, cfg.temperature);
      for (std::size_t t = 0; t < idx.size(); ++t)
        for (std::size_t l = 0; l < classes; ++l)
          out[l * n + j] += w[t] * labels[idx[t] / n].scores()[l * n + idx[t] % n];
    }
  } else {
    for (std::size_t f = 0; f < frames; ++f)
      for (std::size_t j = 0; j < n; ++j) {
        std::vector<double> col(n);
        for (std::size_t i = 0; i < n; ++i) col[i] = blocks[f][i][j];
        std::vector<double> w;
        if (cfg.softmax_order == SoftmaxOrder::BeforeMask) {
          w = softmax(col, cfg.temperature);
          for (std::size_t i = 0; i < n; ++i)
            if (!region_allows(i, j, W, loc)) w[i] = kNegInf;
        } else {
          for (std::size_t i = 0; i < n; ++i)
            if (!region_allows(i, j, W, loc)) col[i] = kNegInf;
          w = softmax(col, cfg.temperature);
          for (std::size_t i = 0; i < n; ++i)
            if (col[i] == kNegInf) w[i] = kNegInf;
        }
        for (auto i : top_k(w, cfg.k))
          for (std::size_t l = 0; l < classes; ++l) out[l * n + j] += w[i] * labels[f].scores()[l * n + i];
      }
    for (auto& v : out) v /= static_cast<double>(frames);

    if (loc.mode == LocalizationMode::Track) {
      // reverse affinity: row s holds previous cell s against every target cell
      const Matrix& last = blocks.back();
      const auto allowed = track_allowed(last, labels.back(), H, W, cfg);
      for (std::size_t l = 0; l < classes; ++l)
        for (std::size_t j = 0; j < n; ++j)
          if (!allowed[l][j]) out[l * n + j] = 0.0;
    }
  }

  std::vector<float> scores(classes * n);
  for (std::size_t i = 0; i < out.size(); ++i) scores[i] = static_cast<float>(std::clamp(out[i], 0.0, 1.0));
  return LabelGrid(classes, H, W, std::move(scores));
}

std::vector<LabelGrid> brute_force_propagate(std::span<const FeatureGrid> features, const LabelGrid& init,
                                             const PropagationConfig& cfg) {
  cfg.validate();
  if (features.empty()) throw ConfigError("brute_force_propagate: no frames");
  if (features.front().cells() > kMaxCells) throw ConfigError("brute_force_propagate: grid too large");

  auto prepare = [&](const FeatureGrid& g) {
    if (!cfg.normalize_features || g.normalized()) return g;
    const auto cols = columns_of(g, true);
    std::vector<float> v(g.values().size());
    for (std::size_t c = 0; c < g.channels(); ++c)
      for (std::size_t j = 0; j < g.cells(); ++j) v[c * g.cells() + j] = static_cast<float>(cols[j][c]);
    return FeatureGrid(g.channels(), g.height(), g.width(), std::move(v), true);
  };

  std::vector<LabelGrid> outputs{init};
  std::vector<FeatureGrid> feats;
  for (const auto& g : features) feats.push_back(prepare(g));

  // history of (frame index) whose prediction is usable as context
  for (std::size_t t = 1; t < feats.size(); ++t) {
    std::vector<std::size_t> ctx;
    if (cfg.include_first) ctx.push_back(0);
    const std::size_t lo = cfg.include_first ? 1 : 0;
    const std::size_t first = t > cfg.context ? std::max(lo, t - cfg.context) : lo;
    for (std::size_t s = first; s < t; ++s) ctx.push_back(s);
    std::vector<FeatureGrid> cf;
    std::vector<LabelGrid> cl;
    for (auto s : ctx) {
      cf.push_back(feats[s]);
      cl.push_back(outputs[s]);
    }
    outputs.push_back(brute_force_step(cf, cl, feats[t], cfg));
  }
  return outputs;
}

}  // namespace labelprop::oracle
