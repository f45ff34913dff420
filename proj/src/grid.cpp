#include "labelprop/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "labelprop/errors.hpp"

namespace labelprop {
namespace {

void require_dims(std::size_t a, std::size_t b, std::size_t c, const char* what) {
  if (a == 0 || b == 0 || c == 0) throw ConfigError(std::string(what) + ": dimensions must be positive");
}

void require_size(std::size_t got, std::size_t want, const char* what) {
  if (got != want)
    throw ConfigError(std::string(what) + ": expected " + std::to_string(want) + " values, got " +
                      std::to_string(got));
}

}  // namespace

FeatureGrid::FeatureGrid(std::size_t channels, std::size_t height, std::size_t width)
    : channels_(channels), height_(height), width_(width), values_(channels * height * width, 0.0f) {
  require_dims(channels, height, width, "FeatureGrid");
}

FeatureGrid::FeatureGrid(std::size_t channels, std::size_t height, std::size_t width,
                         std::vector<float> values, bool normalized)
    : channels_(channels), height_(height), width_(width), values_(std::move(values)), normalized_(normalized) {
  require_dims(channels, height, width, "FeatureGrid");
  require_size(values_.size(), channels * height * width, "FeatureGrid");
  for (float v : values_)
    if (!std::isfinite(v)) throw ConfigError("FeatureGrid: non-finite feature value");
}

FeatureMatrix::FeatureMatrix(std::size_t channels, std::size_t cols, std::size_t height, std::size_t width,
                             std::vector<float> values, bool normalized)
    : channels_(channels), cols_(cols), height_(height), width_(width), values_(std::move(values)),
      normalized_(normalized) {
  require_dims(channels, height, width, "FeatureMatrix");
  if (cols == 0 || cols % (height * width) != 0)
    throw ConfigError("FeatureMatrix: column count must be a positive multiple of H*W");
  require_size(values_.size(), channels * cols, "FeatureMatrix");
}

std::vector<float> FeatureMatrix::location_major() const {
  std::vector<float> out(values_.size());
  for (std::size_t c = 0; c < channels_; ++c)
    for (std::size_t j = 0; j < cols_; ++j) out[j * channels_ + c] = values_[c * cols_ + j];
  return out;
}

LabelGrid::LabelGrid(std::size_t classes, std::size_t height, std::size_t width)
    : classes_(classes), height_(height), width_(width), scores_(classes * height * width, 0.0f) {
  require_dims(classes, height, width, "LabelGrid");
}

LabelGrid::LabelGrid(std::size_t classes, std::size_t height, std::size_t width, std::vector<float> scores)
    : classes_(classes), height_(height), width_(width), scores_(std::move(scores)) {
  require_dims(classes, height, width, "LabelGrid");
  require_size(scores_.size(), classes * height * width, "LabelGrid");
}

LabelMatrix::LabelMatrix(std::size_t classes, std::size_t cols, std::size_t height, std::size_t width)
    : LabelMatrix(classes, cols, height, width, std::vector<float>(classes * cols, 0.0f)) {}

LabelMatrix::LabelMatrix(std::size_t classes, std::size_t cols, std::size_t height, std::size_t width,
                         std::vector<float> scores)
    : classes_(classes), cols_(cols), height_(height), width_(width), scores_(std::move(scores)) {
  require_dims(classes, height, width, "LabelMatrix");
  if (cols == 0 || cols % (height * width) != 0)
    throw ConfigError("LabelMatrix: column count must be a positive multiple of H*W");
  require_size(scores_.size(), classes * cols, "LabelMatrix");
}

LabelMatrix::LabelMatrix(const LabelGrid& grid)
    : LabelMatrix(grid.classes(), grid.cells(), grid.height(), grid.width(),
                  std::vector<float>(grid.scores().begin(), grid.scores().end())) {}

LabelGrid LabelMatrix::to_grid() const {
  if (cols_ != height_ * width_) throw ConfigError("LabelMatrix::to_grid: matrix spans several frames");
  return LabelGrid(classes_, height_, width_, scores_);
}

BinaryMask class_mask(const ClassMap& map, std::int32_t class_id) {
  BinaryMask m(map.height, map.width);
  for (std::size_t i = 0; i < map.ids.size(); ++i) m.bits[i] = map.ids[i] == class_id ? 1 : 0;
  return m;
}

const Keypoint* KeypointSet::find(std::int32_t class_id) const {
  for (const auto& p : points)
    if (p.class_id == class_id) return &p;
  return nullptr;
}

FeatureMatrix flatten(const FeatureGrid& grid) {
  return FeatureMatrix(grid.channels(), grid.cells(), grid.height(), grid.width(),
                       std::vector<float>(grid.values().begin(), grid.values().end()), grid.normalized());
}

FeatureGrid unflatten(const FeatureMatrix& matrix) {
  if (matrix.cols() != matrix.height() * matrix.width())
    throw ConfigError("unflatten: matrix spans several frames");
  return FeatureGrid(matrix.channels(), matrix.height(), matrix.width(),
                     std::vector<float>(matrix.values().begin(), matrix.values().end()), matrix.normalized());
}

FeatureMatrix l2_normalize(const FeatureMatrix& features) {
  const std::size_t channels = features.channels();
  const std::size_t cols = features.cols();
  std::vector<double> norms(cols, 0.0);
  for (std::size_t c = 0; c < channels; ++c) {
    const auto row = features.channel(c);
    for (std::size_t j = 0; j < cols; ++j) norms[j] += static_cast<double>(row[j]) * row[j];
  }
  for (auto& n : norms) n = std::sqrt(n);

  std::vector<float> out(features.values().begin(), features.values().end());
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t j = 0; j < cols; ++j)
      if (norms[j] > 0.0) out[c * cols + j] = static_cast<float>(out[c * cols + j] / norms[j]);
  return FeatureMatrix(channels, cols, features.height(), features.width(), std::move(out), true);
}

FeatureGrid l2_normalize(const FeatureGrid& features) { return unflatten(l2_normalize(flatten(features))); }

LabelGrid resize_scores(const LabelGrid& scores, std::size_t height, std::size_t width) {
  if (height == 0 || width == 0) throw ConfigError("resize_scores: target dimensions must be positive");
  const std::size_t src_h = scores.height();
  const std::size_t src_w = scores.width();
  // align-corners: output index 0 and size-1 map onto input index 0 and size-1
  auto source = [](std::size_t dst, std::size_t dst_n, std::size_t src_n) {
    if (dst_n == 1 || src_n == 1) return 0.0;
    return static_cast<double>(dst) * static_cast<double>(src_n - 1) / static_cast<double>(dst_n - 1);
  };
  struct Tap {
    std::size_t lo, hi;
    double frac;
  };
  auto taps = [&](std::size_t dst_n, std::size_t src_n) {
    std::vector<Tap> t(dst_n);
    for (std::size_t i = 0; i < dst_n; ++i) {
      const double s = source(i, dst_n, src_n);
      const auto lo = std::min(static_cast<std::size_t>(std::floor(s)), src_n - 1);
      t[i] = {lo, std::min(lo + 1, src_n - 1), s - static_cast<double>(lo)};
    }
    return t;
  };
  const auto rows = taps(height, src_h);
  const auto cols = taps(width, src_w);

  LabelGrid out(scores.classes(), height, width);
  for (std::size_t l = 0; l < scores.classes(); ++l) {
    for (std::size_t y = 0; y < height; ++y) {
      const auto& ty = rows[y];
      for (std::size_t x = 0; x < width; ++x) {
        const auto& tx = cols[x];
        const double top = (1.0 - tx.frac) * scores.at(l, ty.lo, tx.lo) + tx.frac * scores.at(l, ty.lo, tx.hi);
        const double bottom = (1.0 - tx.frac) * scores.at(l, ty.hi, tx.lo) + tx.frac * scores.at(l, ty.hi, tx.hi);
        const double v = (1.0 - ty.frac) * top + ty.frac * bottom;
        out.at(l, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return out;
}

ClassMap argmax_labels(const LabelGrid& scores) {
  ClassMap map(scores.height(), scores.width());
  const std::size_t cells = scores.cells();
  const auto values = scores.scores();
  for (std::size_t i = 0; i < cells; ++i) {
    std::int32_t best = 0;
    float best_v = values[i];
    for (std::size_t l = 1; l < scores.classes(); ++l) {
      const float v = values[l * cells + i];
      if (v > best_v) {
        best_v = v;
        best = static_cast<std::int32_t>(l);
      }
    }
    map.ids[i] = best;
  }
  return map;
}

ClassMap nearest_resize(const ClassMap& map, std::size_t height, std::size_t width) {
  if (height == 0 || width == 0 || map.height == 0 || map.width == 0)
    throw ConfigError("nearest_resize: dimensions must be positive");
  ClassMap out(height, width);
  for (std::size_t h = 0; h < height; ++h) {
    const std::size_t sh = std::min((2 * h + 1) * map.height / (2 * height), map.height - 1);
    for (std::size_t w = 0; w < width; ++w) {
      const std::size_t sw = std::min((2 * w + 1) * map.width / (2 * width), map.width - 1);
      out.at(h, w) = map.at(sh, sw);
    }
  }
  return out;
}

LabelGrid onehot_downsample(const ClassMap& map, std::size_t height, std::size_t width, std::size_t classes) {
  const ClassMap small = nearest_resize(map, height, width);
  std::int32_t max_id = 0;
  for (auto id : map.ids) {
    if (id < 0) throw ConfigError("onehot_downsample: negative class id");
    max_id = std::max(max_id, id);
  }
  if (classes == 0) classes = static_cast<std::size_t>(max_id) + 1;
  if (static_cast<std::size_t>(max_id) >= classes)
    throw ConfigError("onehot_downsample: class id " + std::to_string(max_id) + " exceeds class count");
  LabelGrid out(classes, height, width);
  for (std::size_t h = 0; h < height; ++h)
    for (std::size_t w = 0; w < width; ++w) out.at(static_cast<std::size_t>(small.at(h, w)), h, w) = 1.0f;
  return out;
}

LabelGrid keypoints_to_labelgrid(const KeypointSet& keypoints, std::size_t height, std::size_t width,
                                 std::vector<std::string>* warnings) {
  std::int32_t max_id = 0;
  for (const auto& p : keypoints.points) {
    if (p.class_id < 0) throw ConfigError("keypoints_to_labelgrid: negative class id");
    max_id = std::max(max_id, p.class_id);
  }
  LabelGrid out(static_cast<std::size_t>(max_id) + 1, height, width);
  for (const auto& p : keypoints.points) {
    if (!p.visible) continue;
    const long row = std::lround(p.y);
    const long col = std::lround(p.x);
    const long rc = std::clamp(row, 0L, static_cast<long>(height) - 1);
    const long cc = std::clamp(col, 0L, static_cast<long>(width) - 1);
    if ((rc != row || cc != col) && warnings != nullptr)
      warnings->push_back("keypoint class " + std::to_string(p.class_id) + " at (" + std::to_string(p.x) + ", " +
                          std::to_string(p.y) + ") clamped to grid border");
    out.at(static_cast<std::size_t>(p.class_id), static_cast<std::size_t>(rc), static_cast<std::size_t>(cc)) = 1.0f;
  }
  return out;
}

KeypointSet labelgrid_to_keypoints(const LabelGrid& scores) {
  KeypointSet out;
  const std::size_t cells = scores.cells();
  for (std::size_t l = 0; l < scores.classes(); ++l) {
    const auto plane = scores.plane(l);
    std::size_t best = 0;
    for (std::size_t i = 1; i < cells; ++i)
      if (plane[i] > plane[best]) best = i;
    out.points.push_back({static_cast<std::int32_t>(l), static_cast<double>(best % scores.width()),
                          static_cast<double>(best / scores.width()), plane[best] > 0.0f});
  }
  return out;
}

double label_mass(const LabelGrid& scores) {
  double total = 0.0;
  for (float v : scores.scores()) total += v;
  return total / static_cast<double>(scores.cells());
}

}  // namespace labelprop
