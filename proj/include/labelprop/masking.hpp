#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "labelprop/affinity.hpp"
#include "labelprop/grid.hpp"

namespace labelprop {

enum class RegionMetric { Chebyshev, Euclidean };

/// Context rows allowed for each target cell: every context cell within `radius`
/// grid cells of the target, in each of `frames` stacked context frames.
/// Kept factored; nothing of size P x N is stored.
class RegionMask {
 public:
  RegionMask(std::size_t height, std::size_t width, double radius, RegionMetric metric, std::size_t frames);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t frames() const { return frames_; }
  std::size_t rows() const { return height_ * width_ * frames_; }
  std::size_t cols() const { return height_ * width_; }
  double radius() const { return radius_; }
  RegionMetric metric() const { return metric_; }

  /// True when every row is allowed for every column.
  bool saturated() const { return saturated_; }

  bool allowed(std::size_t row, std::size_t col) const;

  /// Allowed rows of target column `col`, ascending.
  void allowed_rows(std::size_t col, std::vector<std::uint32_t>& out) const;
  std::vector<std::uint32_t> allowed_rows(std::size_t col) const;

  /// Exclusion predicate view for the block-level kernels.
  RowExclusion exclusion() const;

 private:
  bool within(long dh, long dw) const;

  std::size_t height_;
  std::size_t width_;
  double radius_;
  RegionMetric metric_;
  std::size_t frames_;
  long reach_;
  bool saturated_;
};

RegionMask fixed_region_mask(std::size_t height, std::size_t width, double radius, RegionMetric metric,
                             std::size_t frames);

/// Grid coordinate; row is the vertical axis.
struct GridPoint {
  double row = 0.0;
  double col = 0.0;
  bool valid = false;
};

/// Affinity-weighted mean of the row coordinates, one point per column. Rows of `affinity`
/// must be the cells of a height x width grid. All-zero columns give invalid points.
std::vector<GridPoint> predict_coordinates(const AffinityBlock& affinity, std::size_t height, std::size_t width);

/// Same, for one normalised column.
GridPoint predict_coordinate(std::span<const double> weights, std::size_t width);

/// Axis-aligned box in grid cells, inclusive bounds. Invalid boxes mean the whole frame.
struct TrackBox {
  double row_lo = 0.0;
  double row_hi = 0.0;
  double col_lo = 0.0;
  double col_hi = 0.0;
  double margin = 0.0;
  bool valid = false;

  double center_row() const { return 0.5 * (row_lo + row_hi); }
  double center_col() const { return 0.5 * (col_lo + col_hi); }
  double half_rows() const { return 0.5 * (row_hi - row_lo); }
  double half_cols() const { return 0.5 * (col_hi - col_lo); }
  bool contains(std::size_t row, std::size_t col) const {
    if (!valid) return true;
    const auto r = static_cast<double>(row);
    const auto c = static_cast<double>(col);
    return r >= row_lo && r <= row_hi && c >= col_lo && c <= col_hi;
  }
};

/// Accumulates predicted points per class and turns them into margin-expanded boxes.
class TrackBoxBuilder {
 public:
  explicit TrackBoxBuilder(std::size_t classes);
  void add(std::size_t class_id, const GridPoint& point);
  /// Class 0 is background and always full-frame.
  std::vector<TrackBox> finish(std::size_t height, std::size_t width, double margin) const;

 private:
  struct Extent {
    double row_lo, row_hi, col_lo, col_hi;
    bool any = false;
  };
  std::vector<Extent> extents_;
};

/// Per-class ROI boxes for the next frame. `reverse` must be column-normalised with rows
/// = target cells and columns = previous-frame cells, so column s predicts where previous
/// cell s lands. Previous cells with score > threshold contribute to their class box.
std::vector<TrackBox> estimate_track_boxes(const AffinityBlock& reverse, const LabelMatrix& previous,
                                           double threshold, double margin);

/// excluded(l, j) is set when target column j lies outside the box of class l.
class TargetExclusion {
 public:
  TargetExclusion() = default;
  TargetExclusion(std::size_t classes, std::size_t cols) : classes_(classes), cols_(cols), bits_(classes * cols, 0) {}

  std::size_t classes() const { return classes_; }
  std::size_t cols() const { return cols_; }
  bool excluded(std::size_t l, std::size_t j) const { return bits_[l * cols_ + j] != 0; }
  void set(std::size_t l, std::size_t j) { bits_[l * cols_ + j] = 1; }
  std::size_t count() const;

 private:
  std::size_t classes_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> bits_;
};

TargetExclusion boxes_to_exclusions(const std::vector<TrackBox>& boxes, std::size_t height, std::size_t width);

}  // namespace labelprop
