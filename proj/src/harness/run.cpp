#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

#include "labelprop/errors.hpp"
#include "labelprop/harness.hpp"

namespace labelprop::harness {

void run_jobs(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& job) {
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(count, 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_lock;
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            job(i);
          } catch (...) {
            std::lock_guard lock(failure_lock);
            if (!failure) failure = std::current_exception();
          }
        }
      });
  }
  if (failure) std::rethrow_exception(failure);
}

double grid_to_pixel(double cell, std::size_t cells, std::size_t pixels) {
  return (cell + 0.5) * static_cast<double>(pixels) / static_cast<double>(cells) - 0.5;
}

double pixel_to_grid(double pixel, std::size_t cells, std::size_t pixels) {
  return (pixel + 0.5) * static_cast<double>(cells) / static_cast<double>(pixels) - 0.5;
}

std::string frame_stem(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%05zu", index);
  return buf;
}

LoadedSequence load_sequence(const io::SequenceManifest& seq) {
  LoadedSequence out;
  out.manifest = &seq;
  out.features.reserve(seq.frames.size());
  for (const auto& f : seq.frames) {
    out.features.push_back(io::read_tensor(f.features));
    const auto& a = out.features.front();
    const auto& b = out.features.back();
    if (a.channels() != b.channels() || a.height() != b.height() || a.width() != b.width())
      throw DataError("sequence '" + seq.id + "': frame " + std::to_string(f.index) +
                      " feature shape differs from the first frame");
  }
  const auto& first = seq.frames.front();
  const std::size_t gh = out.features.front().height();
  const std::size_t gw = out.features.front().width();
  switch (seq.task) {
    case io::TaskKind::Region: {
      const ClassMap map = io::read_mask(*first.annotation);
      out.init = onehot_downsample(map, gh, gw, seq.classes);
      break;
    }
    case io::TaskKind::Semantic: {
      const ClassMap small = nearest_resize(io::read_mask(*first.annotation), gh, gw);
      LabelGrid g(seq.classes, gh, gw);
      for (std::size_t h = 0; h < gh; ++h)
        for (std::size_t w = 0; w < gw; ++w) {
          const std::int32_t id = small.at(h, w);
          if (id >= 0 && static_cast<std::size_t>(id) < seq.classes) g.at(static_cast<std::size_t>(id), h, w) = 1.0f;
        }
      out.init = std::move(g);
      break;
    }
    case io::TaskKind::Keypoint: {
      KeypointSet kp = io::read_keypoints(*first.annotation);
      for (auto& p : kp.points) {
        p.x = pixel_to_grid(p.x, gw, first.width);
        p.y = pixel_to_grid(p.y, gh, first.height);
      }
      out.init = keypoints_to_labelgrid(kp, gh, gw);
      break;
    }
  }
  return out;
}

std::vector<LabelGrid> run_sequence(const LoadedSequence& seq, const PropagationConfig& cfg) {
  return propagate_video(seq.features, seq.init, cfg, ExecutionOptions{1, nullptr});
}

ClassMap prediction_mask(const LabelGrid& scores, std::size_t height, std::size_t width) {
  return argmax_labels(resize_scores(scores, height, width));
}

KeypointSet prediction_keypoints(const LabelGrid& scores, std::size_t height, std::size_t width) {
  KeypointSet kp = labelgrid_to_keypoints(scores);
  for (auto& p : kp.points) {
    p.x = grid_to_pixel(p.x, scores.width(), width);
    p.y = grid_to_pixel(p.y, scores.height(), height);
  }
  return kp;
}

void write_predictions(const io::SequenceManifest& seq, const std::vector<LabelGrid>& outputs, const fs::path& out) {
  if (outputs.size() != seq.frames.size())
    throw ConfigError("write_predictions: " + std::to_string(outputs.size()) + " outputs for " +
                      std::to_string(seq.frames.size()) + " frames");
  const fs::path dir = out / seq.id;
  fs::create_directories(dir);
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    const auto& f = seq.frames[i];
    const std::string stem = frame_stem(f.index);
    io::write_scores(outputs[i], dir / (stem + ".npy"));
    if (seq.task == io::TaskKind::Keypoint)
      io::write_keypoints(prediction_keypoints(outputs[i], f.height, f.width), dir / (stem + ".json"));
    else
      io::write_mask(prediction_mask(outputs[i], f.height, f.width), dir / (stem + ".png"));
  }
}

namespace {

fs::path prediction_path(const fs::path& dir, const io::SequenceManifest& seq, const io::FrameEntry& f) {
  return dir / seq.id / (frame_stem(f.index) + (seq.task == io::TaskKind::Keypoint ? ".json" : ".png"));
}

bool ignored(std::int32_t id, const std::vector<std::int32_t>& ignore) {
  return std::find(ignore.begin(), ignore.end(), id) != ignore.end();
}

}  // namespace

PredictionSource disk_predictions(const fs::path& dir) {
  PredictionSource src;
  src.mask = [dir](const io::SequenceManifest& seq, const io::FrameEntry& f) {
    const fs::path p = prediction_path(dir, seq, f);
    if (!fs::exists(p)) throw DataError("missing prediction " + p.string());
    return io::read_mask(p);
  };
  src.keypoints = [dir](const io::SequenceManifest& seq, const io::FrameEntry& f) {
    const fs::path p = prediction_path(dir, seq, f);
    if (!fs::exists(p)) throw DataError("missing prediction " + p.string());
    return io::read_keypoints(p);
  };
  return src;
}

std::vector<const io::FrameEntry*> evaluation_frames(const io::SequenceManifest& seq) {
  std::vector<const io::FrameEntry*> out;
  const std::size_t base = seq.frames.front().index;
  for (std::size_t i = 1; i < seq.frames.size(); ++i) {
    const auto& f = seq.frames[i];
    if (f.annotation && (f.index - base) % seq.annotation_stride == 0) out.push_back(&f);
  }
  return out;
}

SequenceEvaluation evaluate_sequence(const io::SequenceManifest& seq, const PredictionSource& source,
                                     const EvaluationOptions& opts) {
  SequenceEvaluation ev;
  const auto frames = evaluation_frames(seq);

  if (seq.task == io::TaskKind::Keypoint) {
    ev.keypoint = true;
    ev.pck.assign(opts.pck_alphas.size(), PckCount{});
    for (const auto* f : frames) {
      const KeypointSet gt = io::read_keypoints(*f->annotation);
      const KeypointSet pred = source.keypoints(seq, *f);
      double norm = pck_bbox_norm(gt);
      if (!(norm > 0.0)) norm = static_cast<double>(std::max(f->height, f->width));
      for (std::size_t a = 0; a < opts.pck_alphas.size(); ++a) ev.pck[a] += pck_count(pred, gt, opts.pck_alphas[a], norm);
    }
    return ev;
  }

  const ClassMap first = io::read_mask(*seq.frames.front().annotation);
  std::set<std::int32_t> objects;
  for (auto id : first.ids)
    if (id != 0 && !ignored(id, opts.ignore)) objects.insert(id);

  if (seq.task == io::TaskKind::Semantic) ev.iou.emplace(seq.classes, opts.ignore);
  std::vector<double> jsum(objects.size(), 0.0), fsum(objects.size(), 0.0);
  for (const auto* f : frames) {
    const ClassMap gt = io::read_mask(*f->annotation);
    const ClassMap pred = source.mask(seq, *f);
    if (pred.height != gt.height || pred.width != gt.width)
      throw DataError("sequence '" + seq.id + "' frame " + std::to_string(f->index) + ": prediction is " +
                      std::to_string(pred.height) + "x" + std::to_string(pred.width) + ", annotation is " +
                      std::to_string(gt.height) + "x" + std::to_string(gt.width));
    const double tol = opts.boundary_tolerance.value_or(default_boundary_tolerance(gt.height, gt.width));
    std::size_t o = 0;
    for (auto id : objects) {
      const BinaryMask p = class_mask(pred, id);
      const BinaryMask g = class_mask(gt, id);
      jsum[o] += jaccard(p, g);
      fsum[o] += boundary_f(p, g, tol);
      ++o;
    }
    if (ev.iou) ev.iou->add(pred, gt);
  }
  if (!frames.empty()) {
    const double n = static_cast<double>(frames.size());
    std::size_t o = 0;
    for (auto id : objects) {
      ev.scores.push_back({seq.id, id, jsum[o] / n, fsum[o] / n});
      ++o;
    }
  }
  return ev;
}

MetricsReport finish_report(const std::vector<SequenceEvaluation>& parts, const EvaluationOptions& opts) {
  std::vector<SequenceScore> scores;
  for (const auto& p : parts) scores.insert(scores.end(), p.scores.begin(), p.scores.end());
  MetricsReport report;
  if (!scores.empty()) report = davis_aggregate(scores, opts.averaging);

  if (std::any_of(parts.begin(), parts.end(), [](const auto& p) { return p.keypoint; })) {
    std::vector<PckCount> total(opts.pck_alphas.size());
    for (const auto& p : parts)
      for (std::size_t a = 0; a < p.pck.size() && a < total.size(); ++a) total[a] += p.pck[a];
    for (std::size_t a = 0; a < total.size(); ++a) report.pck.push_back({opts.pck_alphas[a], total[a].value()});
  }

  std::optional<IouAccumulator> iou;
  for (const auto& p : parts) {
    if (!p.iou) continue;
    if (!iou) {
      iou = *p.iou;
      continue;
    }
    if (iou->classes() != p.iou->classes()) throw DataError("semantic sequences declare different class counts");
    iou->merge(*p.iou);
  }
  if (iou) report.miou = iou->mean();
  return report;
}

void require_predictions(const io::Manifest& manifest, const fs::path& dir) {
  std::string missing;
  std::size_t count = 0;
  for (const auto& seq : manifest.sequences)
    for (const auto* f : evaluation_frames(seq))
      if (!fs::exists(prediction_path(dir, seq, *f))) {
        if (count < 20) missing += (missing.empty() ? "" : ", ") + seq.id + ":" + std::to_string(f->index);
        ++count;
      }
  if (count > 0)
    throw DataError(std::to_string(count) + " prediction(s) missing under " + dir.string() + " (" + missing +
                    (count > 20 ? ", ..." : "") + ")");
}

}  // namespace labelprop::harness
