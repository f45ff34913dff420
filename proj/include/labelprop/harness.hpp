#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "labelprop/io.hpp"
#include "labelprop/metrics.hpp"
#include "labelprop/propagator.hpp"
#include "labelprop/synth.hpp"

namespace labelprop::harness {

namespace fs = std::filesystem;

struct EvaluationOptions {
  std::optional<double> boundary_tolerance;  // pixels; default scales with image size
  DavisAveraging averaging = DavisAveraging::PerObject;
  std::vector<double> pck_alphas{0.1};
  std::vector<std::int32_t> ignore{255};  // semantic runs
};

struct RunConfig {
  PropagationConfig propagation;
  EvaluationOptions evaluation;
};

/// JSON config. Temperature is given as "temperature" (T) or "inv_temperature" (1/T), not both.
RunConfig parse_run_config(const std::string& json_text, const std::string& origin = "<config>");
RunConfig load_run_config(const fs::path& path);
/// Canonical JSON; temperature always written as T.
std::string dump_run_config(const RunConfig& cfg);

struct SweepGrid {
  RunConfig base;
  std::vector<double> temperatures;  // T
  std::vector<std::size_t> ks;
  std::vector<std::size_t> contexts;
  std::vector<Aggregation> aggregations;
  std::vector<Localization> localizations;

  /// Cartesian product, T outermost and localization innermost.
  std::vector<PropagationConfig> expand() const;
  std::size_t size() const;
  /// Parameters with more than one value, among "T", "k", "n".
  std::vector<std::string> swept_axes() const;
};

SweepGrid parse_sweep_grid(const std::string& json_text, const std::string& origin = "<sweep>");
SweepGrid load_sweep_grid(const fs::path& path);

/// Synthetic dataset recipe: one spec, `sequences` videos seeded seed, seed + 1, ...
struct SynthDataset {
  SynthSpec spec;
  std::size_t sequences = 1;
};

/// Either explicit objects or {"preset": "three_objects"} with grid and noise overrides.
SynthDataset parse_synth_spec(const std::string& json_text, const std::string& origin = "<synth>");
SynthDataset load_synth_spec(const fs::path& path);

/// Default worker count: LABELPROP_WORKERS when set, otherwise the hardware concurrency.
std::size_t default_workers();
inline constexpr const char* kWorkersEnv = "LABELPROP_WORKERS";

/// Runs jobs [0, count) over `workers` threads; results are addressed by job index.
void run_jobs(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& job);

// --- Sequences -------------------------------------------------------------

struct LoadedSequence {
  const io::SequenceManifest* manifest = nullptr;
  std::vector<FeatureGrid> features;
  LabelGrid init;
};

LoadedSequence load_sequence(const io::SequenceManifest& seq);

/// Propagation over one sequence; the step itself runs single-threaded.
std::vector<LabelGrid> run_sequence(const LoadedSequence& seq, const PropagationConfig& cfg);

/// Grid-cell centre to pixel coordinate and back, matching the nearest-neighbour sampling.
double grid_to_pixel(double cell, std::size_t cells, std::size_t pixels);
double pixel_to_grid(double pixel, std::size_t cells, std::size_t pixels);

ClassMap prediction_mask(const LabelGrid& scores, std::size_t height, std::size_t width);
KeypointSet prediction_keypoints(const LabelGrid& scores, std::size_t height, std::size_t width);

/// Writes <out>/<sequence>/<index>.png (or .json for keypoints) and <index>.npy scores.
void write_predictions(const io::SequenceManifest& seq, const std::vector<LabelGrid>& outputs, const fs::path& out);

std::string frame_stem(std::size_t index);

// --- Evaluation --------------------------------------------------------------

/// Source of predictions for one frame; throws DataError when absent.
struct PredictionSource {
  std::function<ClassMap(const io::SequenceManifest&, const io::FrameEntry&)> mask;
  std::function<KeypointSet(const io::SequenceManifest&, const io::FrameEntry&)> keypoints;
};

PredictionSource disk_predictions(const fs::path& dir);

/// Per-sequence partial results, combined by `finish_report`.
struct SequenceEvaluation {
  std::vector<SequenceScore> scores;
  std::vector<PckCount> pck;          // one per alpha
  std::optional<IouAccumulator> iou;  // semantic
  bool keypoint = false;
};

/// Frames scored for a sequence: annotated frames after the first, on the annotation stride.
std::vector<const io::FrameEntry*> evaluation_frames(const io::SequenceManifest& seq);

SequenceEvaluation evaluate_sequence(const io::SequenceManifest& seq, const PredictionSource& source,
                                     const EvaluationOptions& opts);
MetricsReport finish_report(const std::vector<SequenceEvaluation>& parts, const EvaluationOptions& opts);

/// Checks every evaluation frame has a prediction; throws DataError listing the missing frames.
void require_predictions(const io::Manifest& manifest, const fs::path& dir);

// --- Commands ----------------------------------------------------------------

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kPartialSweep = 3 };

struct CommandOptions {
  fs::path manifest;
  fs::path config;
  fs::path out;
  fs::path predictions;
  std::size_t workers = 1;
  std::optional<std::uint64_t> seed;
};

/// Each returns an exit code; progress and results go to `log`.
int cmd_propagate(const CommandOptions& opts, std::ostream& log);
int cmd_evaluate(const CommandOptions& opts, std::ostream& log);
int cmd_sweep(const CommandOptions& opts, std::ostream& log);
int cmd_synth(const CommandOptions& opts, std::ostream& log);
int cmd_trace(const CommandOptions& opts, std::ostream& log);

struct SweepRow {
  PropagationConfig config;
  std::optional<MetricsReport> report;
  std::string error;
};

std::string format_sweep_csv(const std::vector<SweepRow>& rows);
std::vector<SweepRow> run_sweep(const SweepGrid& grid, const io::Manifest& manifest, std::size_t workers);
void write_plot_data(const SweepGrid& grid, const std::vector<SweepRow>& rows, const fs::path& dir);

/// Writes a synthetic dataset (features, annotations, manifest) and returns the manifest path.
fs::path write_synthetic_dataset(const SynthDataset& dataset, const fs::path& out);

/// sequence,frame,label_mass rows for every <sequence>/<index>.npy under `dir`.
std::string trace_csv(const fs::path& dir);

}  // namespace labelprop::harness
