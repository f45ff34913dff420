#include "labelprop/masking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "labelprop/errors.hpp"

namespace labelprop {

RegionMask::RegionMask(std::size_t height, std::size_t width, double radius, RegionMetric metric,
                       std::size_t frames)
    : height_(height), width_(width), radius_(radius), metric_(metric), frames_(frames) {
  if (height == 0 || width == 0) throw ConfigError("RegionMask: grid dimensions must be positive");
  if (frames == 0) throw ConfigError("RegionMask: frame count must be at least 1");
  if (!(radius >= 0.0)) throw ConfigError("RegionMask: radius must be non-negative");
  const double extent = static_cast<double>(std::max(height, width));
  reach_ = static_cast<long>(std::floor(std::min(radius, extent)));
  const long dh = static_cast<long>(height) - 1;
  const long dw = static_cast<long>(width) - 1;
  saturated_ = within(dh, dw);
}

bool RegionMask::within(long dh, long dw) const {
  if (metric_ == RegionMetric::Chebyshev) return static_cast<double>(std::max(std::labs(dh), std::labs(dw))) <= radius_;
  return static_cast<double>(dh * dh + dw * dw) <= radius_ * radius_;
}

bool RegionMask::allowed(std::size_t row, std::size_t col) const {
  const std::size_t cells = height_ * width_;
  const std::size_t cell = row % cells;
  const long dh = static_cast<long>(cell / width_) - static_cast<long>(col / width_);
  const long dw = static_cast<long>(cell % width_) - static_cast<long>(col % width_);
  return within(dh, dw);
}

void RegionMask::allowed_rows(std::size_t col, std::vector<std::uint32_t>& out) const {
  out.clear();
  const std::size_t cells = height_ * width_;
  const long th = static_cast<long>(col / width_);
  const long tw = static_cast<long>(col % width_);
  const long h0 = std::max(0L, th - reach_);
  const long h1 = std::min(static_cast<long>(height_) - 1, th + reach_);
  const long w0 = std::max(0L, tw - reach_);
  const long w1 = std::min(static_cast<long>(width_) - 1, tw + reach_);
  for (std::size_t f = 0; f < frames_; ++f)
    for (long h = h0; h <= h1; ++h)
      for (long w = w0; w <= w1; ++w)
        if (within(h - th, w - tw))
          out.push_back(static_cast<std::uint32_t>(f * cells + static_cast<std::size_t>(h) * width_ +
                                                   static_cast<std::size_t>(w)));
}

std::vector<std::uint32_t> RegionMask::allowed_rows(std::size_t col) const {
  std::vector<std::uint32_t> out;
  allowed_rows(col, out);
  return out;
}

RowExclusion RegionMask::exclusion() const {
  return [mask = *this](std::size_t row, std::size_t col) { return !mask.allowed(row, col); };
}

RegionMask fixed_region_mask(std::size_t height, std::size_t width, double radius, RegionMetric metric,
                             std::size_t frames) {
  return RegionMask(height, width, radius, metric, frames);
}

GridPoint predict_coordinate(std::span<const double> weights, std::size_t width) {
  double row = 0.0;
  double col = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    row += weights[i] * static_cast<double>(i / width);
    col += weights[i] * static_cast<double>(i % width);
    total += weights[i];
  }
  if (total == 0.0) return {};
  return {row, col, true};
}

std::vector<GridPoint> predict_coordinates(const AffinityBlock& affinity, std::size_t height, std::size_t width) {
  if (affinity.state() != AffinityState::ColumnNormalized)
    throw ConfigError("predict_coordinates: affinity must be column-normalized");
  if (affinity.rows() != height * width)
    throw ConfigError("predict_coordinates: affinity rows do not match the coordinate grid");
  std::vector<GridPoint> out(affinity.cols());
  std::vector<double> w(affinity.rows());
  for (std::size_t j = 0; j < affinity.cols(); ++j) {
    for (std::size_t i = 0; i < affinity.rows(); ++i) w[i] = affinity(i, j);
    out[j] = predict_coordinate(w, width);
  }
  return out;
}

TrackBoxBuilder::TrackBoxBuilder(std::size_t classes) : extents_(classes) {}

void TrackBoxBuilder::add(std::size_t class_id, const GridPoint& point) {
  if (!point.valid) return;
  auto& e = extents_.at(class_id);
  if (!e.any) {
    e = {point.row, point.row, point.col, point.col, true};
    return;
  }
  e.row_lo = std::min(e.row_lo, point.row);
  e.row_hi = std::max(e.row_hi, point.row);
  e.col_lo = std::min(e.col_lo, point.col);
  e.col_hi = std::max(e.col_hi, point.col);
}

std::vector<TrackBox> TrackBoxBuilder::finish(std::size_t height, std::size_t width, double margin) const {
  if (margin < 0.0) throw ConfigError("track margin must be non-negative");
  const double max_row = static_cast<double>(height) - 1.0;
  const double max_col = static_cast<double>(width) - 1.0;
  std::vector<TrackBox> boxes(extents_.size());
  for (std::size_t l = 0; l < extents_.size(); ++l) {
    auto& box = boxes[l];
    box.margin = margin;
    const auto& e = extents_[l];
    if (l == 0 || !e.any) {
      box.row_hi = max_row;
      box.col_hi = max_col;
      continue;
    }
    box.row_lo = std::clamp(e.row_lo - margin, 0.0, max_row);
    box.row_hi = std::clamp(e.row_hi + margin, 0.0, max_row);
    box.col_lo = std::clamp(e.col_lo - margin, 0.0, max_col);
    box.col_hi = std::clamp(e.col_hi + margin, 0.0, max_col);
    box.valid = true;
  }
  return boxes;
}

std::vector<TrackBox> estimate_track_boxes(const AffinityBlock& reverse, const LabelMatrix& previous,
                                           double threshold, double margin) {
  const std::size_t height = previous.height();
  const std::size_t width = previous.width();
  const std::size_t cells = height * width;
  if (previous.cols() != cells) throw ConfigError("estimate_track_boxes: previous labels must cover one frame");
  if (reverse.rows() != cells || reverse.cols() != cells)
    throw ConfigError("estimate_track_boxes: affinity must be N x N over one context frame");
  const auto points = predict_coordinates(reverse, height, width);
  TrackBoxBuilder builder(previous.classes());
  for (std::size_t s = 0; s < cells; ++s)
    for (std::size_t l = 1; l < previous.classes(); ++l)
      if (previous(l, s) > threshold) builder.add(l, points[s]);
  return builder.finish(height, width, margin);
}

std::size_t TargetExclusion::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

TargetExclusion boxes_to_exclusions(const std::vector<TrackBox>& boxes, std::size_t height, std::size_t width) {
  TargetExclusion out(boxes.size(), height * width);
  for (std::size_t l = 0; l < boxes.size(); ++l) {
    if (!boxes[l].valid) continue;
    for (std::size_t h = 0; h < height; ++h)
      for (std::size_t w = 0; w < width; ++w)
        if (!boxes[l].contains(h, w)) out.set(l, h * width + w);
  }
  return out;
}

}  // namespace labelprop
