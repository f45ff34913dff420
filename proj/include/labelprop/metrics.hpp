#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "labelprop/grid.hpp"
#include "labelprop/simd.hpp"

namespace labelprop {

/// Region and boundary score of one object over one sequence.
struct SequenceScore {
  std::string sequence;
  std::int32_t object = 0;
  double j = 0.0;
  double f = 0.0;
};

struct PckResult {
  double alpha = 0.0;
  double value = 0.0;
};

struct MetricsReport {
  double j_mean = 0.0;
  double j_recall = 0.0;
  double f_mean = 0.0;
  double f_recall = 0.0;
  double jf_mean = 0.0;
  std::vector<SequenceScore> per_sequence;
  std::vector<PckResult> pck;  // keypoint runs
  std::optional<double> miou;  // semantic runs
};

/// |pred & gt| / |pred | gt|; 1 when both masks are empty.
double jaccard(const BinaryMask& pred, const BinaryMask& gt, const simd::Kernels& kernels = simd::active());

/// Foreground pixels with a background 4-neighbour or touching the image border.
BinaryMask boundary_pixels(const BinaryMask& mask);

/// Marks every pixel within euclidean distance `radius` of a set pixel.
BinaryMask dilate_disk(const BinaryMask& mask, double radius);

struct BoundaryScore {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
};

/// Boundary precision/recall/F with matching tolerance `tolerance` pixels.
BoundaryScore boundary_score(const BinaryMask& pred, const BinaryMask& gt, double tolerance,
                             const simd::Kernels& kernels = simd::active());
double boundary_f(const BinaryMask& pred, const BinaryMask& gt, double tolerance,
                  const simd::Kernels& kernels = simd::active());

/// ceil(0.008 * image diagonal), the usual DAVIS tolerance.
double default_boundary_tolerance(std::size_t height, std::size_t width);

/// Fraction of scores strictly above `threshold`.
double recall_over_threshold(std::span<const double> scores, double threshold = 0.5);

enum class DavisAveraging {
  PerObject,    // every (sequence, object) entry counts once
  PerSequence,  // objects averaged within a sequence first
};

MetricsReport davis_aggregate(std::span<const SequenceScore> scores,
                              DavisAveraging averaging = DavisAveraging::PerObject);

struct PckCount {
  std::size_t correct = 0;
  std::size_t total = 0;
  PckCount& operator+=(const PckCount& o) {
    correct += o.correct;
    total += o.total;
    return *this;
  }
  /// 1 when there is nothing to score.
  double value() const { return total == 0 ? 1.0 : static_cast<double>(correct) / static_cast<double>(total); }
};

/// Visible ground-truth keypoints whose same-class prediction lies within alpha * norm.
PckCount pck_count(const KeypointSet& pred, const KeypointSet& gt, double alpha, double norm);
double pck(const KeypointSet& pred, const KeypointSet& gt, double alpha, double norm);

/// max(width, height) of the bounding box of the visible ground-truth keypoints.
double pck_bbox_norm(const KeypointSet& gt);

/// Per-class intersection and union counts accumulated over many frames.
class IouAccumulator {
 public:
  explicit IouAccumulator(std::size_t classes, std::vector<std::int32_t> ignore = {});
  void add(const ClassMap& pred, const ClassMap& gt);
  void merge(const IouAccumulator& other);
  std::size_t classes() const { return classes_; }
  /// Mean IoU over classes seen in prediction or ground truth; 1 when none were seen.
  double mean() const;
  double iou(std::size_t cls) const;
  bool present(std::size_t cls) const { return unions_[cls] > 0; }

 private:
  std::size_t classes_;
  std::vector<std::int32_t> ignore_;
  std::vector<std::uint64_t> intersections_;
  std::vector<std::uint64_t> unions_;
};

double miou(const ClassMap& pred, const ClassMap& gt, std::size_t classes, std::vector<std::int32_t> ignore = {});

}  // namespace labelprop
