#include "labelprop/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "labelprop/errors.hpp"

namespace labelprop {
namespace {

void require_same_dims(const BinaryMask& a, const BinaryMask& b, const char* what) {
  if (a.height != b.height || a.width != b.width)
    throw DataError(std::string(what) + ": mask dimensions differ (" + std::to_string(a.height) + "x" +
                    std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" + std::to_string(b.width) + ")");
}

double mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

double jaccard(const BinaryMask& pred, const BinaryMask& gt, const simd::Kernels& kernels) {
  require_same_dims(pred, gt, "jaccard");
  const auto c = kernels.overlap(pred.bits.data(), gt.bits.data(), pred.bits.size());
  if (c.union_ == 0) return 1.0;
  return static_cast<double>(c.intersection) / static_cast<double>(c.union_);
}

BinaryMask boundary_pixels(const BinaryMask& mask) {
  BinaryMask out(mask.height, mask.width);
  const std::size_t h = mask.height;
  const std::size_t w = mask.width;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      if (!mask.at(y, x)) continue;
      const bool edge = y == 0 || x == 0 || y + 1 == h || x + 1 == w || !mask.at(y - 1, x) || !mask.at(y + 1, x) ||
                        !mask.at(y, x - 1) || !mask.at(y, x + 1);
      out.set(y, x, edge);
    }
  return out;
}

BinaryMask dilate_disk(const BinaryMask& mask, double radius) {
  const long reach = static_cast<long>(std::floor(radius));
  std::vector<std::pair<long, long>> disk;
  for (long dy = -reach; dy <= reach; ++dy)
    for (long dx = -reach; dx <= reach; ++dx)
      if (static_cast<double>(dy * dy + dx * dx) <= radius * radius) disk.emplace_back(dy, dx);
  BinaryMask out(mask.height, mask.width);
  const long h = static_cast<long>(mask.height);
  const long w = static_cast<long>(mask.width);
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x) {
      if (!mask.bits[static_cast<std::size_t>(y * w + x)]) continue;
      for (const auto& [dy, dx] : disk) {
        const long yy = y + dy;
        const long xx = x + dx;
        if (yy >= 0 && yy < h && xx >= 0 && xx < w) out.bits[static_cast<std::size_t>(yy * w + xx)] = 1;
      }
    }
  return out;
}

BoundaryScore boundary_score(const BinaryMask& pred, const BinaryMask& gt, double tolerance,
                             const simd::Kernels& kernels) {
  require_same_dims(pred, gt, "boundary_f");
  if (!(tolerance >= 0.0)) throw ConfigError("boundary_f: tolerance must be non-negative");
  const BinaryMask pb = boundary_pixels(pred);
  const BinaryMask gb = boundary_pixels(gt);
  const auto counts = kernels.overlap(pb.bits.data(), gb.bits.data(), pb.bits.size());
  const std::uint64_t n_pred = counts.first;
  const std::uint64_t n_gt = counts.second;
  if (n_pred == 0 && n_gt == 0) return {1.0, 1.0, 1.0};
  if (n_pred == 0 || n_gt == 0) return {n_pred == 0 ? 1.0 : 0.0, n_gt == 0 ? 1.0 : 0.0, 0.0};

  const BinaryMask gd = dilate_disk(gb, tolerance);
  const BinaryMask pd = dilate_disk(pb, tolerance);
  const auto matched_pred = kernels.overlap(pb.bits.data(), gd.bits.data(), pb.bits.size()).intersection;
  const auto matched_gt = kernels.overlap(gb.bits.data(), pd.bits.data(), gb.bits.size()).intersection;
  BoundaryScore s;
  s.precision = static_cast<double>(matched_pred) / static_cast<double>(n_pred);
  s.recall = static_cast<double>(matched_gt) / static_cast<double>(n_gt);
  s.f = (s.precision + s.recall) > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

double boundary_f(const BinaryMask& pred, const BinaryMask& gt, double tolerance, const simd::Kernels& kernels) {
  return boundary_score(pred, gt, tolerance, kernels).f;
}

double default_boundary_tolerance(std::size_t height, std::size_t width) {
  const double diag = std::sqrt(static_cast<double>(height * height + width * width));
  return std::ceil(0.008 * diag);
}

double recall_over_threshold(std::span<const double> scores, double threshold) {
  if (scores.empty()) throw DataError("recall_over_threshold: no scores");
  const auto above = std::count_if(scores.begin(), scores.end(), [&](double s) { return s > threshold; });
  return static_cast<double>(above) / static_cast<double>(scores.size());
}

MetricsReport davis_aggregate(std::span<const SequenceScore> scores, DavisAveraging averaging) {
  if (scores.empty()) throw DataError("davis_aggregate: no sequence scores");
  std::vector<double> js;
  std::vector<double> fs;
  if (averaging == DavisAveraging::PerObject) {
    for (const auto& s : scores) {
      js.push_back(s.j);
      fs.push_back(s.f);
    }
  } else {
    // std::map keeps the result independent of input order
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> groups;
    for (const auto& s : scores) {
      groups[s.sequence].first.push_back(s.j);
      groups[s.sequence].second.push_back(s.f);
    }
    for (const auto& [name, g] : groups) {
      js.push_back(mean(g.first));
      fs.push_back(mean(g.second));
    }
  }
  // order-independent sums
  std::sort(js.begin(), js.end());
  std::sort(fs.begin(), fs.end());
  MetricsReport r;
  r.j_mean = mean(js);
  r.f_mean = mean(fs);
  r.j_recall = recall_over_threshold(js);
  r.f_recall = recall_over_threshold(fs);
  r.jf_mean = 0.5 * (r.j_mean + r.f_mean);
  r.per_sequence.assign(scores.begin(), scores.end());
  return r;
}

PckCount pck_count(const KeypointSet& pred, const KeypointSet& gt, double alpha, double norm) {
  if (!(norm > 0.0)) throw ConfigError("pck: normalisation constant must be positive");
  PckCount c;
  const double limit = alpha * norm;
  for (const auto& g : gt.points) {
    if (!g.visible) continue;
    ++c.total;
    const Keypoint* p = pred.find(g.class_id);
    if (p == nullptr || !p->visible) continue;
    if (std::hypot(p->x - g.x, p->y - g.y) <= limit) ++c.correct;
  }
  return c;
}

double pck(const KeypointSet& pred, const KeypointSet& gt, double alpha, double norm) {
  return pck_count(pred, gt, alpha, norm).value();
}

double pck_bbox_norm(const KeypointSet& gt) {
  double x0 = 0, x1 = 0, y0 = 0, y1 = 0;
  bool any = false;
  for (const auto& p : gt.points) {
    if (!p.visible) continue;
    if (!any) {
      x0 = x1 = p.x;
      y0 = y1 = p.y;
      any = true;
    }
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  }
  return std::max(x1 - x0, y1 - y0);
}

IouAccumulator::IouAccumulator(std::size_t classes, std::vector<std::int32_t> ignore)
    : classes_(classes), ignore_(std::move(ignore)), intersections_(classes, 0), unions_(classes, 0) {
  if (classes == 0) throw ConfigError("IouAccumulator: class count must be positive");
}

void IouAccumulator::add(const ClassMap& pred, const ClassMap& gt) {
  if (pred.height != gt.height || pred.width != gt.width) throw DataError("miou: class map dimensions differ");
  const auto ignored = [&](std::int32_t c) { return std::find(ignore_.begin(), ignore_.end(), c) != ignore_.end(); };
  for (std::size_t i = 0; i < pred.ids.size(); ++i) {
    const std::int32_t p = pred.ids[i];
    const std::int32_t g = gt.ids[i];
    for (std::int32_t c : {p, g})
      if (c < 0 || static_cast<std::size_t>(c) >= classes_)
        if (!ignored(c)) throw DataError("miou: class id " + std::to_string(c) + " outside [0, L)");
    if (ignored(g)) continue;
    const bool p_ok = !ignored(p) && p >= 0 && static_cast<std::size_t>(p) < classes_;
    const bool g_ok = !ignored(g) && g >= 0 && static_cast<std::size_t>(g) < classes_;
    if (p == g) {
      if (p_ok) {
        ++intersections_[static_cast<std::size_t>(p)];
        ++unions_[static_cast<std::size_t>(p)];
      }
      continue;
    }
    if (p_ok) ++unions_[static_cast<std::size_t>(p)];
    if (g_ok) ++unions_[static_cast<std::size_t>(g)];
  }
}

void IouAccumulator::merge(const IouAccumulator& other) {
  if (other.classes_ != classes_) throw ConfigError("IouAccumulator: class counts differ");
  for (std::size_t c = 0; c < classes_; ++c) {
    intersections_[c] += other.intersections_[c];
    unions_[c] += other.unions_[c];
  }
}

double IouAccumulator::iou(std::size_t cls) const {
  return unions_[cls] == 0 ? 1.0 : static_cast<double>(intersections_[cls]) / static_cast<double>(unions_[cls]);
}

double IouAccumulator::mean() const {
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t c = 0; c < classes_; ++c) {
    if (unions_[c] == 0) continue;
    total += iou(c);
    ++n;
  }
  return n == 0 ? 1.0 : total / static_cast<double>(n);
}

double miou(const ClassMap& pred, const ClassMap& gt, std::size_t classes, std::vector<std::int32_t> ignore) {
  IouAccumulator acc(classes, std::move(ignore));
  acc.add(pred, gt);
  return acc.mean();
}

}  // namespace labelprop
