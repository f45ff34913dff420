#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "labelprop/grid.hpp"

namespace labelprop {

enum class ShapeKind { Rectangle, Disk };

struct SynthObject {
  ShapeKind shape = ShapeKind::Rectangle;
  std::size_t rows = 4;    // rectangle height in cells
  std::size_t cols = 4;    // rectangle width in cells
  std::size_t radius = 2;  // disk radius in cells; the disk spans 2 * radius + 1 cells
  double row = 0.0;        // top-left corner of the bounding box at frame 0
  double col = 0.0;
  double velocity_row = 0.0;  // cells per frame
  double velocity_col = 0.0;
  std::int32_t class_id = 1;

  std::size_t extent_rows() const { return shape == ShapeKind::Disk ? 2 * radius + 1 : rows; }
  std::size_t extent_cols() const { return shape == ShapeKind::Disk ? 2 * radius + 1 : cols; }
};

/// Synthetic moving-shapes video. Each cell's feature is the identity embedding of the
/// covering object (or background) followed by a sinusoidal position code, plus noise.
struct SynthSpec {
  std::size_t height = 16;
  std::size_t width = 16;
  std::size_t frames = 10;
  std::vector<SynthObject> objects;
  std::size_t identity_dims = 0;  // 0: one dimension per class including background
  std::size_t position_dims = 8;  // multiple of 4
  double identity_amplitude = 1.0;
  double position_amplitude = 0.1;
  double noise = 0.0;  // gaussian sigma
  std::uint64_t seed = 0;
  std::size_t pixel_scale = 1;  // masks are written at grid size * pixel_scale

  /// Throws ConfigError for geometry or embedding settings that cannot be realised.
  void validate() const;
  std::size_t classes() const;
  std::size_t channels() const;
};

struct SynthVideo {
  std::vector<FeatureGrid> features;
  std::vector<LabelGrid> gt;        // one-hot at grid resolution
  std::vector<ClassMap> masks;      // grid resolution
  std::vector<ClassMap> pixel_masks;  // grid resolution * pixel_scale
  std::size_t classes = 0;
};

/// Top-left bounding-box corner of `object` at frame t; motion reflects at the borders.
std::pair<long, long> object_origin(const SynthObject& object, std::size_t height, std::size_t width, std::size_t t);

/// Deterministic for a given spec (including seed).
SynthVideo gen_synthetic_video(const SynthSpec& spec);

/// Three-object corpus used by the regression benchmark: rectangle, disk and rectangle
/// moving in different directions on a height x width grid.
SynthSpec three_object_spec(std::size_t height, std::size_t width, std::size_t frames, double noise,
                            std::uint64_t seed);

}  // namespace labelprop
