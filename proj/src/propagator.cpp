#include "labelprop/propagator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>

#include "labelprop/errors.hpp"

namespace labelprop {

void PropagationConfig::validate() const {
  require_positive_temperature(temperature);
  if (k == 0) throw ConfigError("k must be at least 1");
  if (!include_first && context == 0)
    throw ConfigError("context is empty: set include_first or use at least one previous frame");
  switch (localization.mode) {
    case LocalizationMode::None: break;
    case LocalizationMode::FixedRegion:
      if (!(localization.radius >= 0.0)) throw ConfigError("fixed_region radius must be non-negative");
      break;
    case LocalizationMode::Track:
      if (aggregation != Aggregation::PerFrame) throw ConfigError("track localization requires per_frame aggregation");
      if (softmax_order != SoftmaxOrder::BeforeMask)
        throw ConfigError("track localization requires softmax_order before_mask");
      if (!(localization.track_margin >= 0.0)) throw ConfigError("track margin must be non-negative");
      if (!std::isfinite(localization.track_threshold)) throw ConfigError("track threshold must be finite");
      break;
  }
}

std::string to_string(Aggregation a) { return a == Aggregation::Overall ? "overall" : "per_frame"; }
std::string to_string(SoftmaxOrder o) { return o == SoftmaxOrder::BeforeMask ? "before_mask" : "after_mask"; }
std::string to_string(RegionMetric m) { return m == RegionMetric::Chebyshev ? "chebyshev" : "euclidean"; }
std::string to_string(LocalizationMode m) {
  switch (m) {
    case LocalizationMode::None: return "none";
    case LocalizationMode::FixedRegion: return "fixed_region";
    case LocalizationMode::Track: return "track";
  }
  return "unknown";
}

std::string describe(const Localization& loc) {
  std::ostringstream os;
  switch (loc.mode) {
    case LocalizationMode::None: os << "none"; break;
    case LocalizationMode::FixedRegion:
      os << "fixed_region(r=" << loc.radius << "," << to_string(loc.metric) << ")";
      break;
    case LocalizationMode::Track:
      os << "track(t=" << loc.track_threshold << ",m=" << loc.track_margin << ")";
      break;
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// ContextBuffer

ContextBuffer::ContextBuffer(std::size_t capacity, bool include_first)
    : capacity_(capacity), include_first_(include_first) {
  if (!include_first && capacity == 0) throw ConfigError("ContextBuffer: no anchor and zero capacity");
}

ContextFrame ContextBuffer::make(FeatureMatrix features, LabelMatrix labels) {
  ContextFrame f{std::move(features), {}, std::move(labels)};
  f.packed = f.features.location_major();
  return f;
}

void ContextBuffer::check(const FeatureMatrix& features, const LabelMatrix& labels) const {
  if (features.cols() != features.height() * features.width())
    throw ConfigError("ContextBuffer: features must cover exactly one frame");
  if (labels.cols() != features.cols() || labels.height() != features.height() || labels.width() != features.width())
    throw ConfigError("ContextBuffer: labels do not match the feature grid");
  const ContextFrame* ref = anchor_ ? &*anchor_ : (recent_.empty() ? nullptr : &recent_.front());
  if (ref != nullptr && (ref->features.channels() != features.channels() || ref->features.cols() != features.cols() ||
                         ref->labels.classes() != labels.classes()))
    throw ConfigError("ContextBuffer: frame shape differs from the buffered context");
}

void ContextBuffer::start(FeatureMatrix features, LabelMatrix labels) {
  anchor_.reset();
  recent_.clear();
  check(features, labels);
  if (include_first_)
    anchor_ = make(std::move(features), std::move(labels));
  else
    recent_.push_back(make(std::move(features), std::move(labels)));
}

void ContextBuffer::push(FeatureMatrix features, LabelMatrix labels) {
  check(features, labels);
  if (capacity_ == 0) return;
  recent_.push_back(make(std::move(features), std::move(labels)));
  while (recent_.size() > capacity_) recent_.pop_front();
}

std::vector<const ContextFrame*> ContextBuffer::frames() const {
  std::vector<const ContextFrame*> out;
  if (anchor_) out.push_back(&*anchor_);
  for (const auto& f : recent_) out.push_back(&f);
  return out;
}

std::size_t ContextBuffer::size() const { return (anchor_ ? 1 : 0) + recent_.size(); }

// ---------------------------------------------------------------------------
// Affinity sources

FeatureAffinity::FeatureAffinity(std::vector<std::span<const float>> blocks, std::span<const float> target,
                                 std::size_t dim, std::size_t cols, const simd::Kernels& kernels)
    : blocks_(std::move(blocks)), target_(target), dim_(dim), cols_(cols), kernels_(&kernels) {
  if (dim == 0 || target.size() != dim * cols) throw ConfigError("FeatureAffinity: target size mismatch");
  for (const auto& b : blocks_)
    if (b.empty() || b.size() % dim != 0) throw ConfigError("FeatureAffinity: context block size mismatch");
}

void FeatureAffinity::column(std::size_t block, std::size_t col, std::span<const std::uint32_t> rows,
                             std::span<float> out) const {
  kernels_->dot_rows_indexed(blocks_[block].data(), rows.data(), rows.size(), dim_, target_.data() + col * dim_,
                             out.data());
}

void FeatureAffinity::full_column(std::size_t block, std::size_t col, std::span<float> out) const {
  kernels_->dot_rows(blocks_[block].data(), rows(block), dim_, target_.data() + col * dim_, out.data());
}

void FeatureAffinity::row(std::size_t block, std::size_t cell, std::span<float> out) const {
  kernels_->dot_rows(target_.data(), cols_, dim_, blocks_[block].data() + cell * dim_, out.data());
}

DenseAffinity::DenseAffinity(std::vector<AffinityBlock> blocks) : blocks_(std::move(blocks)) {
  if (blocks_.empty()) throw ConfigError("DenseAffinity: no blocks");
  for (const auto& b : blocks_) {
    if (b.state() != AffinityState::Raw) throw ConfigError("DenseAffinity: blocks must hold raw affinities");
    if (b.cols() != blocks_.front().cols()) throw ConfigError("DenseAffinity: blocks disagree on target size");
  }
}

void DenseAffinity::column(std::size_t block, std::size_t col, std::span<const std::uint32_t> rows,
                           std::span<float> out) const {
  for (std::size_t t = 0; t < rows.size(); ++t) out[t] = blocks_[block](rows[t], col);
}

void DenseAffinity::full_column(std::size_t block, std::size_t col, std::span<float> out) const {
  for (std::size_t i = 0; i < blocks_[block].rows(); ++i) out[i] = blocks_[block](i, col);
}

void DenseAffinity::row(std::size_t block, std::size_t cell, std::span<float> out) const {
  for (std::size_t j = 0; j < blocks_[block].cols(); ++j) out[j] = blocks_[block](cell, j);
}

// ---------------------------------------------------------------------------
// Propagation kernel

namespace {

struct Scratch {
  std::vector<float> raw;
  std::vector<double> weights;
  std::vector<std::uint32_t> rows;
  std::vector<column::Entry> entries;
  std::vector<double> acc;
};

std::vector<TrackBox> track_boxes(const AffinitySource& source, const LabelMatrix& previous, std::size_t height,
                                  std::size_t width, const PropagationConfig& cfg) {
  const std::size_t cells = height * width;
  const std::size_t block = source.blocks() - 1;
  TrackBoxBuilder builder(previous.classes());
  std::vector<float> raw(cells);
  std::vector<double> w(cells);
  for (std::size_t s = 0; s < cells; ++s) {
    bool labelled = false;
    for (std::size_t l = 1; l < previous.classes() && !labelled; ++l)
      labelled = previous(l, s) > cfg.localization.track_threshold;
    if (!labelled) continue;
    source.row(block, s, raw);
    std::copy(raw.begin(), raw.end(), w.begin());
    column::softmax(w, cfg.temperature);
    const GridPoint p = predict_coordinate(w, width);
    for (std::size_t l = 1; l < previous.classes(); ++l)
      if (previous(l, s) > cfg.localization.track_threshold) builder.add(l, p);
  }
  return builder.finish(height, width, cfg.localization.track_margin);
}

template <typename Fn>
void parallel_columns(std::size_t cols, std::size_t workers, Fn&& fn) {
  workers = std::clamp<std::size_t>(workers, 1, cols);
  if (workers == 1) {
    fn(std::size_t{0}, cols);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (cols + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(cols, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
}

}  // namespace

LabelMatrix propagate_affinity(const AffinitySource& source, std::span<const LabelMatrix* const> labels,
                               std::size_t height, std::size_t width, const PropagationConfig& cfg,
                               const ExecutionOptions& exec) {
  cfg.validate();
  const std::size_t cells = height * width;
  const std::size_t blocks = source.blocks();
  if (blocks == 0 || labels.size() != blocks) throw ConfigError("propagate: need one label matrix per context block");
  if (source.cols() != cells) throw ConfigError("propagate: target column count does not match the grid");
  const bool overall = cfg.aggregation == Aggregation::Overall;
  if (overall && blocks != 1) throw ConfigError("propagate: overall aggregation expects one concatenated block");
  const std::size_t classes = labels.front()->classes();
  for (std::size_t b = 0; b < blocks; ++b) {
    if (labels[b]->classes() != classes) throw ConfigError("propagate: context frames disagree on class count");
    if (labels[b]->cols() != source.rows(b)) throw ConfigError("propagate: labels do not match context rows");
    if (source.rows(b) % cells != 0) throw ConfigError("propagate: context rows are not whole frames");
  }

  std::optional<RegionMask> region;
  if (cfg.localization.mode == LocalizationMode::FixedRegion) {
    RegionMask mask(height, width, cfg.localization.radius, cfg.localization.metric,
                    overall ? source.rows(0) / cells : 1);
    if (!mask.saturated()) region = mask;
  }
  std::optional<TargetExclusion> targets;
  if (cfg.localization.mode == LocalizationMode::Track)
    targets = boxes_to_exclusions(track_boxes(source, *labels.back(), height, width, cfg), height, width);

  LabelMatrix out(classes, cells, height, width);
  const double frames = overall ? 1.0 : static_cast<double>(blocks);

  auto run = [&](std::size_t begin, std::size_t end) {
    Scratch s;
    s.acc.resize(classes);
    for (std::size_t j = begin; j < end; ++j) {
      std::fill(s.acc.begin(), s.acc.end(), 0.0);
      for (std::size_t b = 0; b < blocks; ++b) {
        const std::size_t rows = source.rows(b);
        s.entries.clear();
        if (region) region->allowed_rows(j, s.rows);

        if (overall || cfg.softmax_order == SoftmaxOrder::AfterMask) {
          // exclusions leave the candidate set before any softmax
          if (region) {
            s.raw.resize(s.rows.size());
            source.column(b, j, s.rows, s.raw);
            for (std::size_t t = 0; t < s.rows.size(); ++t) s.entries.push_back({s.rows[t], s.raw[t]});
          } else {
            s.raw.resize(rows);
            source.full_column(b, j, s.raw);
            for (std::size_t i = 0; i < rows; ++i) s.entries.push_back({static_cast<std::uint32_t>(i), s.raw[i]});
          }
          if (overall) {
            column::select_top(s.entries, cfg.k);
            column::softmax(s.entries, cfg.temperature);
          } else {
            column::softmax(s.entries, cfg.temperature);
            column::select_top(s.entries, cfg.k);
          }
        } else {
          // normalise the full column, then zero the excluded rows
          s.raw.resize(rows);
          source.full_column(b, j, s.raw);
          s.weights.assign(s.raw.begin(), s.raw.end());
          column::softmax(s.weights, cfg.temperature);
          if (region) {
            for (auto r : s.rows) s.entries.push_back({r, s.weights[r]});
          } else {
            for (std::size_t i = 0; i < rows; ++i) s.entries.push_back({static_cast<std::uint32_t>(i), s.weights[i]});
          }
          column::select_top(s.entries, cfg.k);
        }

        const LabelMatrix& y = *labels[b];
        for (const auto& e : s.entries)
          for (std::size_t l = 0; l < classes; ++l) s.acc[l] += e.value * y(l, e.row);
      }
      for (std::size_t l = 0; l < classes; ++l) {
        const double v = (targets && targets->excluded(l, j)) ? 0.0 : s.acc[l] / frames;
        out(l, j) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  };
  parallel_columns(cells, exec.workers, run);
  return out;
}

LabelMatrix propagate_step(const ContextBuffer& context, const FeatureMatrix& target, const PropagationConfig& cfg,
                           const ExecutionOptions& exec) {
  cfg.validate();
  if (context.empty()) throw ConfigError("propagate_step: context is empty");
  const auto frames = context.frames();
  const auto& first = frames.front()->features;
  if (target.channels() != first.channels())
    throw ConfigError("propagate_step: target has " + std::to_string(target.channels()) + " channels, context has " +
                      std::to_string(first.channels()));
  if (target.cols() != first.cols() || target.height() != first.height() || target.width() != first.width())
    throw ConfigError("propagate_step: target grid differs from the context grid");

  const simd::Kernels& kernels = exec.kernels != nullptr ? *exec.kernels : simd::active();
  const auto packed_target = target.location_major();
  const std::size_t dim = target.channels();
  const std::size_t cells = target.cols();

  if (cfg.aggregation == Aggregation::Overall) {
    std::vector<float> packed;
    packed.reserve(frames.size() * frames.front()->packed.size());
    for (const auto* f : frames) packed.insert(packed.end(), f->packed.begin(), f->packed.end());
    // same column layout as concat_context
    const std::size_t classes = frames.front()->labels.classes();
    const std::size_t total = cells * frames.size();
    std::vector<float> lv(classes * total);
    for (std::size_t l = 0; l < classes; ++l)
      for (std::size_t f = 0; f < frames.size(); ++f)
        for (std::size_t j = 0; j < cells; ++j) lv[l * total + f * cells + j] = frames[f]->labels(l, j);
    const LabelMatrix joined(classes, total, target.height(), target.width(), std::move(lv));
    FeatureAffinity source({std::span<const float>(packed)}, packed_target, dim, cells, kernels);
    const LabelMatrix* ptr = &joined;
    return propagate_affinity(source, std::span<const LabelMatrix* const>(&ptr, 1), target.height(), target.width(),
                              cfg, exec);
  }

  std::vector<std::span<const float>> blocks;
  std::vector<const LabelMatrix*> labels;
  for (const auto* f : frames) {
    blocks.emplace_back(f->packed);
    labels.push_back(&f->labels);
  }
  FeatureAffinity source(std::move(blocks), packed_target, dim, cells, kernels);
  return propagate_affinity(source, labels, target.height(), target.width(), cfg, exec);
}

std::vector<LabelGrid> propagate_video(std::span<const FeatureGrid> features, const LabelGrid& init,
                                       const PropagationConfig& cfg, const ExecutionOptions& exec) {
  cfg.validate();
  if (features.empty()) throw ConfigError("propagate_video: no frames");
  const auto& f0 = features.front();
  for (std::size_t t = 0; t < features.size(); ++t)
    if (features[t].channels() != f0.channels() || features[t].height() != f0.height() ||
        features[t].width() != f0.width())
      throw ConfigError("propagate_video: frame " + std::to_string(t) + " has a different feature shape");
  if (init.height() != f0.height() || init.width() != f0.width())
    throw ConfigError("propagate_video: initial labels must be at feature-grid resolution");

  auto prepare = [&](const FeatureGrid& g) {
    FeatureMatrix m = flatten(g);
    return cfg.normalize_features && !m.normalized() ? l2_normalize(m) : m;
  };

  std::vector<LabelGrid> outputs{init};
  ContextBuffer buffer(cfg.context, cfg.include_first);
  buffer.start(prepare(f0), LabelMatrix(init));
  for (std::size_t t = 1; t < features.size(); ++t) {
    FeatureMatrix target = prepare(features[t]);
    LabelMatrix z = propagate_step(buffer, target, cfg, exec);
    outputs.push_back(z.to_grid());
    buffer.push(std::move(target), std::move(z));
  }
  return outputs;
}

std::vector<double> label_mass_trace(std::span<const LabelGrid> outputs) {
  if (outputs.empty()) throw ConfigError("label_mass_trace: no frames");
  std::vector<double> out;
  out.reserve(outputs.size());
  for (const auto& g : outputs) out.push_back(label_mass(g));
  return out;
}

}  // namespace labelprop
