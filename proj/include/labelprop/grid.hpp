#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace labelprop {

/// Per-frame feature map, layout [C][H][W] row-major.
class FeatureGrid {
 public:
  FeatureGrid() = default;
  FeatureGrid(std::size_t channels, std::size_t height, std::size_t width);
  /// Throws ConfigError when the value count does not match or a value is not finite.
  FeatureGrid(std::size_t channels, std::size_t height, std::size_t width,
              std::vector<float> values, bool normalized = false);

  std::size_t channels() const { return channels_; }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t cells() const { return height_ * width_; }
  bool normalized() const { return normalized_; }

  float at(std::size_t c, std::size_t h, std::size_t w) const {
    return values_[(c * height_ + h) * width_ + w];
  }
  float& at(std::size_t c, std::size_t h, std::size_t w) {
    return values_[(c * height_ + h) * width_ + w];
  }
  std::span<const float> values() const { return values_; }
  std::span<float> values() { return values_; }

  bool operator==(const FeatureGrid&) const = default;

 private:
  std::size_t channels_ = 0;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<float> values_;
  bool normalized_ = false;
};

/// Flattened C x N view of a feature grid. Column j is raster cell (j / W, j % W)
/// of the originating grid; concatenated context matrices carry N * n columns.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t channels, std::size_t cols, std::size_t height,
                std::size_t width, std::vector<float> values, bool normalized = false);

  std::size_t channels() const { return channels_; }
  std::size_t cols() const { return cols_; }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  bool normalized() const { return normalized_; }

  float operator()(std::size_t c, std::size_t j) const { return values_[c * cols_ + j]; }
  float& operator()(std::size_t c, std::size_t j) { return values_[c * cols_ + j]; }
  std::span<const float> channel(std::size_t c) const {
    return std::span<const float>(values_).subspan(c * cols_, cols_);
  }
  std::span<const float> values() const { return values_; }
  std::span<float> values() { return values_; }

  /// Location-major copy ([N][C]) so each column is contiguous.
  std::vector<float> location_major() const;

  bool operator==(const FeatureMatrix&) const = default;

 private:
  std::size_t channels_ = 0;
  std::size_t cols_ = 0;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<float> values_;
  bool normalized_ = false;
};

/// Soft class scores per grid cell, layout [L][H][W].
class LabelGrid {
 public:
  LabelGrid() = default;
  LabelGrid(std::size_t classes, std::size_t height, std::size_t width);
  LabelGrid(std::size_t classes, std::size_t height, std::size_t width, std::vector<float> scores);

  std::size_t classes() const { return classes_; }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t cells() const { return height_ * width_; }

  float at(std::size_t l, std::size_t h, std::size_t w) const {
    return scores_[(l * height_ + h) * width_ + w];
  }
  float& at(std::size_t l, std::size_t h, std::size_t w) {
    return scores_[(l * height_ + h) * width_ + w];
  }
  std::span<const float> plane(std::size_t l) const {
    return std::span<const float>(scores_).subspan(l * cells(), cells());
  }
  std::span<const float> scores() const { return scores_; }
  std::span<float> scores() { return scores_; }

  bool operator==(const LabelGrid&) const = default;

 private:
  std::size_t classes_ = 0;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<float> scores_;
};

/// L x N label matrix aligned with a FeatureMatrix.
class LabelMatrix {
 public:
  LabelMatrix() = default;
  LabelMatrix(std::size_t classes, std::size_t cols, std::size_t height, std::size_t width);
  LabelMatrix(std::size_t classes, std::size_t cols, std::size_t height, std::size_t width,
              std::vector<float> scores);
  explicit LabelMatrix(const LabelGrid& grid);

  std::size_t classes() const { return classes_; }
  std::size_t cols() const { return cols_; }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }

  float operator()(std::size_t l, std::size_t j) const { return scores_[l * cols_ + j]; }
  float& operator()(std::size_t l, std::size_t j) { return scores_[l * cols_ + j]; }
  std::span<const float> scores() const { return scores_; }
  std::span<float> scores() { return scores_; }

  /// Only valid when cols() == height() * width().
  LabelGrid to_grid() const;

  bool operator==(const LabelMatrix&) const = default;

 private:
  std::size_t classes_ = 0;
  std::size_t cols_ = 0;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<float> scores_;
};

/// Integer class id per pixel or cell, row-major.
struct ClassMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::int32_t> ids;

  ClassMap() = default;
  ClassMap(std::size_t h, std::size_t w, std::int32_t fill = 0) : height(h), width(w), ids(h * w, fill) {}
  std::int32_t at(std::size_t h, std::size_t w) const { return ids[h * width + w]; }
  std::int32_t& at(std::size_t h, std::size_t w) { return ids[h * width + w]; }
  bool operator==(const ClassMap&) const = default;
};

/// 0/1 byte per pixel.
struct BinaryMask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> bits;

  BinaryMask() = default;
  BinaryMask(std::size_t h, std::size_t w) : height(h), width(w), bits(h * w, 0) {}
  bool at(std::size_t h, std::size_t w) const { return bits[h * width + w] != 0; }
  void set(std::size_t h, std::size_t w, bool v) { bits[h * width + w] = v ? 1 : 0; }
  bool operator==(const BinaryMask&) const = default;
};

BinaryMask class_mask(const ClassMap& map, std::int32_t class_id);

struct Keypoint {
  std::int32_t class_id = 0;
  double x = 0.0;  // column coordinate
  double y = 0.0;  // row coordinate
  bool visible = true;
  bool operator==(const Keypoint&) const = default;
};

struct KeypointSet {
  std::vector<Keypoint> points;
  const Keypoint* find(std::int32_t class_id) const;
  bool operator==(const KeypointSet&) const = default;
};

FeatureMatrix flatten(const FeatureGrid& grid);
FeatureGrid unflatten(const FeatureMatrix& matrix);

/// Scales each column to unit L2 norm; all-zero columns pass through.
FeatureMatrix l2_normalize(const FeatureMatrix& features);
FeatureGrid l2_normalize(const FeatureGrid& features);

/// Bilinear, align-corners resize of every class plane; output clipped to [0, 1].
LabelGrid resize_scores(const LabelGrid& scores, std::size_t height, std::size_t width);

/// Per cell, the class with the largest score. Ties resolve to the lowest id.
ClassMap argmax_labels(const LabelGrid& scores);

/// Nearest-neighbour sample of a full-resolution map (sampling at cell centres), one-hot encoded.
/// `classes` = 0 means max id + 1.
LabelGrid onehot_downsample(const ClassMap& map, std::size_t height, std::size_t width,
                            std::size_t classes = 0);

/// Nearest-neighbour sample without one-hot encoding.
ClassMap nearest_resize(const ClassMap& map, std::size_t height, std::size_t width);

/// One class plane per keypoint id, with a single 1 at the rounded cell of each visible point.
/// Points off the grid are clamped to the border; a message is appended to `warnings` if given.
LabelGrid keypoints_to_labelgrid(const KeypointSet& keypoints, std::size_t height, std::size_t width,
                                 std::vector<std::string>* warnings = nullptr);

/// Per class plane, the maximum-score cell (lowest raster index on ties); not visible if max is 0.
KeypointSet labelgrid_to_keypoints(const LabelGrid& scores);

/// Mean over cells of the summed class scores for one grid.
double label_mass(const LabelGrid& scores);

}  // namespace labelprop
