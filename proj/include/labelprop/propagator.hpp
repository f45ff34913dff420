#pragma once

#include <cstddef>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "labelprop/affinity.hpp"
#include "labelprop/grid.hpp"
#include "labelprop/masking.hpp"
#include "labelprop/simd.hpp"

namespace labelprop {

enum class Aggregation { PerFrame, Overall };
enum class SoftmaxOrder { BeforeMask, AfterMask };
enum class LocalizationMode { None, FixedRegion, Track };

struct Localization {
  LocalizationMode mode = LocalizationMode::None;
  double radius = 12.0;  // grid cells
  RegionMetric metric = RegionMetric::Chebyshev;
  double track_threshold = 0.5;
  double track_margin = 2.0;  // grid cells
};

struct PropagationConfig {
  Aggregation aggregation = Aggregation::PerFrame;
  double temperature = 1.0;
  std::size_t k = 5;
  std::size_t context = 7;  // previous frames, not counting the first frame
  bool include_first = true;
  Localization localization;
  SoftmaxOrder softmax_order = SoftmaxOrder::BeforeMask;  // per-frame only
  bool normalize_features = true;

  /// Throws ConfigError describing the first violated constraint.
  void validate() const;
};

std::string to_string(Aggregation a);
std::string to_string(SoftmaxOrder o);
std::string to_string(LocalizationMode m);
std::string to_string(RegionMetric m);
/// e.g. "none", "fixed_region(r=12,chebyshev)", "track(t=0.5,m=2)".
std::string describe(const Localization& loc);

struct ContextFrame {
  FeatureMatrix features;
  std::vector<float> packed;  // location-major copy of features
  LabelMatrix labels;
};

/// First-frame anchor plus a bounded queue of recent (features, predicted labels).
class ContextBuffer {
 public:
  ContextBuffer(std::size_t capacity, bool include_first);

  /// Initial frame: becomes the anchor when include_first, otherwise the first recent entry.
  void start(FeatureMatrix features, LabelMatrix labels);
  void push(FeatureMatrix features, LabelMatrix labels);

  /// Context in order: anchor first, then recent frames oldest first.
  std::vector<const ContextFrame*> frames() const;
  std::size_t size() const;
  bool empty() const { return size() == 0; }
  bool has_anchor() const { return anchor_.has_value(); }
  std::size_t capacity() const { return capacity_; }

 private:
  static ContextFrame make(FeatureMatrix features, LabelMatrix labels);
  void check(const FeatureMatrix& features, const LabelMatrix& labels) const;

  std::size_t capacity_;
  bool include_first_;
  std::optional<ContextFrame> anchor_;
  std::deque<ContextFrame> recent_;
};

/// Raw affinities for one propagation step, organised in blocks: one block per context
/// frame for per-frame aggregation, a single concatenated block for overall.
class AffinitySource {
 public:
  virtual ~AffinitySource() = default;
  virtual std::size_t blocks() const = 0;
  virtual std::size_t rows(std::size_t block) const = 0;
  virtual std::size_t cols() const = 0;
  /// out[t] = A[rows[t]][col] for the given block.
  virtual void column(std::size_t block, std::size_t col, std::span<const std::uint32_t> rows,
                      std::span<float> out) const = 0;
  /// out[i] = A[i][col] for every row of the block.
  virtual void full_column(std::size_t block, std::size_t col, std::span<float> out) const = 0;
  /// out[j] = A[cell][j]: affinity of context cell `cell` with every target cell.
  virtual void row(std::size_t block, std::size_t cell, std::span<float> out) const = 0;
};

/// Dot products computed on demand from location-major features.
class FeatureAffinity final : public AffinitySource {
 public:
  /// `blocks` holds one location-major context matrix per block (each rows x dim).
  FeatureAffinity(std::vector<std::span<const float>> blocks, std::span<const float> target, std::size_t dim,
                  std::size_t cols, const simd::Kernels& kernels);

  std::size_t blocks() const override { return blocks_.size(); }
  std::size_t rows(std::size_t block) const override { return blocks_[block].size() / dim_; }
  std::size_t cols() const override { return cols_; }
  void column(std::size_t block, std::size_t col, std::span<const std::uint32_t> rows,
              std::span<float> out) const override;
  void full_column(std::size_t block, std::size_t col, std::span<float> out) const override;
  void row(std::size_t block, std::size_t cell, std::span<float> out) const override;

 private:
  std::vector<std::span<const float>> blocks_;
  std::span<const float> target_;
  std::size_t dim_;
  std::size_t cols_;
  const simd::Kernels* kernels_;
};

/// Precomputed raw affinity blocks.
class DenseAffinity final : public AffinitySource {
 public:
  explicit DenseAffinity(std::vector<AffinityBlock> blocks);

  std::size_t blocks() const override { return blocks_.size(); }
  std::size_t rows(std::size_t block) const override { return blocks_[block].rows(); }
  std::size_t cols() const override { return blocks_.front().cols(); }
  void column(std::size_t block, std::size_t col, std::span<const std::uint32_t> rows,
              std::span<float> out) const override;
  void full_column(std::size_t block, std::size_t col, std::span<float> out) const override;
  void row(std::size_t block, std::size_t cell, std::span<float> out) const override;

  const AffinityBlock& block(std::size_t b) const { return blocks_[b]; }

 private:
  std::vector<AffinityBlock> blocks_;
};

struct ExecutionOptions {
  std::size_t workers = 1;                 // threads over target columns
  const simd::Kernels* kernels = nullptr;  // null: simd::active()
};

/// One propagation step from a given affinity source. `labels[b]` are the labels of
/// block b (concatenated for overall). Output covers one target frame of height x width.
LabelMatrix propagate_affinity(const AffinitySource& source, std::span<const LabelMatrix* const> labels,
                               std::size_t height, std::size_t width, const PropagationConfig& cfg,
                               const ExecutionOptions& exec = {});

/// One propagation step: predicts labels for target frame `target` from the context.
LabelMatrix propagate_step(const ContextBuffer& context, const FeatureMatrix& target, const PropagationConfig& cfg,
                           const ExecutionOptions& exec = {});

/// Runs the step over a whole video. Output frame 0 is `init`; predictions are fed back
/// into the context as soft labels.
std::vector<LabelGrid> propagate_video(std::span<const FeatureGrid> features, const LabelGrid& init,
                                       const PropagationConfig& cfg, const ExecutionOptions& exec = {});

/// Per-frame mean over cells of the summed class scores.
std::vector<double> label_mass_trace(std::span<const LabelGrid> outputs);

}  // namespace labelprop
