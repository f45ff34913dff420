#include "labelprop/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "labelprop/errors.hpp"

namespace labelprop {
namespace {

double reflect(double pos, double span) {
  if (span <= 0.0) return 0.0;
  const double period = 2.0 * span;
  double x = std::fmod(pos, period);
  if (x < 0.0) x += period;
  return x > span ? period - x : x;
}

bool covers(const SynthObject& o, long top, long left, long h, long w) {
  const long dh = h - top;
  const long dw = w - left;
  if (dh < 0 || dw < 0 || dh >= static_cast<long>(o.extent_rows()) || dw >= static_cast<long>(o.extent_cols()))
    return false;
  if (o.shape == ShapeKind::Rectangle) return true;
  const long r = static_cast<long>(o.radius);
  return (dh - r) * (dh - r) + (dw - r) * (dw - r) <= r * r;
}

}  // namespace

std::size_t SynthSpec::classes() const {
  std::int32_t max_id = 0;
  for (const auto& o : objects) max_id = std::max(max_id, o.class_id);
  return static_cast<std::size_t>(max_id) + 1;
}

std::size_t SynthSpec::channels() const { return (identity_dims == 0 ? classes() : identity_dims) + position_dims; }

void SynthSpec::validate() const {
  if (height == 0 || width == 0 || frames == 0) throw ConfigError("synth: grid size and frame count must be positive");
  if (position_dims % 4 != 0) throw ConfigError("synth: position_dims must be a multiple of 4");
  if (!(noise >= 0.0)) throw ConfigError("synth: noise sigma must be non-negative");
  if (pixel_scale == 0) throw ConfigError("synth: pixel_scale must be positive");
  std::set<std::int32_t> ids;
  for (const auto& o : objects) {
    if (o.class_id < 1) throw ConfigError("synth: object class ids start at 1 (0 is background)");
    if (!ids.insert(o.class_id).second)
      throw ConfigError("synth: duplicate object class id " + std::to_string(o.class_id));
    if (o.extent_rows() == 0 || o.extent_cols() == 0) throw ConfigError("synth: object size must be positive");
    if (o.extent_rows() > height || o.extent_cols() > width)
      throw ConfigError("synth: object of class " + std::to_string(o.class_id) + " does not fit the grid");
    if (o.row < 0.0 || o.col < 0.0 || o.row + static_cast<double>(o.extent_rows()) > static_cast<double>(height) ||
        o.col + static_cast<double>(o.extent_cols()) > static_cast<double>(width))
      throw ConfigError("synth: object of class " + std::to_string(o.class_id) + " starts outside the grid");
  }
  if (identity_dims != 0 && identity_dims < classes())
    throw ConfigError("synth: identity_dims too small for orthogonal class embeddings");
  if (channels() == 0) throw ConfigError("synth: feature vectors would be empty");
}

std::pair<long, long> object_origin(const SynthObject& object, std::size_t height, std::size_t width, std::size_t t) {
  const double span_r = static_cast<double>(height - object.extent_rows());
  const double span_c = static_cast<double>(width - object.extent_cols());
  const double tt = static_cast<double>(t);
  const double r = reflect(object.row + object.velocity_row * tt, span_r);
  const double c = reflect(object.col + object.velocity_col * tt, span_c);
  return {std::lround(r), std::lround(c)};
}

SynthVideo gen_synthetic_video(const SynthSpec& spec) {
  spec.validate();
  const std::size_t classes = spec.classes();
  const std::size_t id_dims = spec.identity_dims == 0 ? classes : spec.identity_dims;
  const std::size_t channels = spec.channels();
  const std::size_t H = spec.height;
  const std::size_t W = spec.width;
  const double base = std::numbers::pi / static_cast<double>(std::max(H, W));

  // position code depends only on the cell
  std::vector<float> position(spec.position_dims * H * W);
  for (std::size_t f = 0; f < spec.position_dims / 4; ++f) {
    const double freq = base * std::ldexp(1.0, static_cast<int>(f));
    for (std::size_t h = 0; h < H; ++h)
      for (std::size_t w = 0; w < W; ++w) {
        const std::size_t cell = h * W + w;
        const double ah = freq * static_cast<double>(h);
        const double aw = freq * static_cast<double>(w);
        const double a = spec.position_amplitude;
        position[(4 * f + 0) * H * W + cell] = static_cast<float>(a * std::sin(ah));
        position[(4 * f + 1) * H * W + cell] = static_cast<float>(a * std::cos(ah));
        position[(4 * f + 2) * H * W + cell] = static_cast<float>(a * std::sin(aw));
        position[(4 * f + 3) * H * W + cell] = static_cast<float>(a * std::cos(aw));
      }
  }

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, spec.noise > 0.0 ? spec.noise : 1.0);

  SynthVideo video;
  video.classes = classes;
  for (std::size_t t = 0; t < spec.frames; ++t) {
    ClassMap mask(H, W, 0);
    for (const auto& o : spec.objects) {
      const auto [top, left] = object_origin(o, H, W, t);
      for (std::size_t h = 0; h < H; ++h)
        for (std::size_t w = 0; w < W; ++w)
          if (covers(o, top, left, static_cast<long>(h), static_cast<long>(w))) mask.at(h, w) = o.class_id;
    }

    FeatureGrid grid(channels, H, W);
    auto values = grid.values();
    for (std::size_t cell = 0; cell < H * W; ++cell)
      values[static_cast<std::size_t>(mask.ids[cell]) * H * W + cell] = static_cast<float>(spec.identity_amplitude);
    std::copy(position.begin(), position.end(), values.begin() + static_cast<std::ptrdiff_t>(id_dims * H * W));
    if (spec.noise > 0.0)
      for (auto& v : values) v = static_cast<float>(v + gauss(rng));

    LabelGrid gt(classes, H, W);
    for (std::size_t h = 0; h < H; ++h)
      for (std::size_t w = 0; w < W; ++w) gt.at(static_cast<std::size_t>(mask.at(h, w)), h, w) = 1.0f;

    ClassMap pixels(H * spec.pixel_scale, W * spec.pixel_scale);
    for (std::size_t y = 0; y < pixels.height; ++y)
      for (std::size_t x = 0; x < pixels.width; ++x) pixels.at(y, x) = mask.at(y / spec.pixel_scale, x / spec.pixel_scale);

    video.features.push_back(std::move(grid));
    video.gt.push_back(std::move(gt));
    video.masks.push_back(std::move(mask));
    video.pixel_masks.push_back(std::move(pixels));
  }
  return video;
}

SynthSpec three_object_spec(std::size_t height, std::size_t width, std::size_t frames, double noise,
                            std::uint64_t seed) {
  SynthSpec spec;
  spec.height = height;
  spec.width = width;
  spec.frames = frames;
  spec.noise = noise;
  spec.seed = seed;
  const auto H = static_cast<double>(height);
  const auto W = static_cast<double>(width);

  SynthObject a;
  a.shape = ShapeKind::Rectangle;
  a.rows = std::max<std::size_t>(1, height / 4);
  a.cols = std::max<std::size_t>(1, width / 5);
  a.row = std::floor(0.1 * H);
  a.col = std::floor(0.1 * W);
  a.velocity_row = 0.5;
  a.velocity_col = 0.8;
  a.class_id = 1;

  SynthObject b;
  b.shape = ShapeKind::Disk;
  b.radius = std::max<std::size_t>(1, std::min(height, width) / 8);
  b.row = std::floor(0.5 * H);
  b.col = std::floor(0.55 * W);
  b.velocity_row = -0.6;
  b.velocity_col = 0.4;
  b.class_id = 2;

  SynthObject c;
  c.shape = ShapeKind::Rectangle;
  c.rows = std::max<std::size_t>(1, height / 6);
  c.cols = std::max<std::size_t>(1, width / 3);
  c.row = std::floor(0.75 * H);
  c.col = std::floor(0.2 * W);
  c.velocity_row = 0.3;
  c.velocity_col = -0.7;
  c.class_id = 3;

  spec.objects = {a, b, c};
  for (auto& o : spec.objects) {
    o.row = std::min(o.row, H - static_cast<double>(o.extent_rows()));
    o.col = std::min(o.col, W - static_cast<double>(o.extent_cols()));
  }
  return spec;
}

}  // namespace labelprop
