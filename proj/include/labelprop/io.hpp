#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "labelprop/grid.hpp"
#include "labelprop/metrics.hpp"

namespace labelprop::io {

namespace fs = std::filesystem;

// --- NPY tensors -----------------------------------------------------------

struct NpyArray {
  std::vector<std::size_t> shape;
  std::vector<float> data;  // C order, float32 (float64 input is narrowed)
};

/// Parses an NPY v1/v2/v3 file holding little-endian float32 or float64 data in C order.
NpyArray read_npy(const fs::path& path);
NpyArray parse_npy(std::span<const std::uint8_t> bytes, const std::string& origin = "<memory>");

/// Writes an NPY v1.0 float32 file with the header padded to a 64-byte boundary.
void write_npy(const fs::path& path, std::span<const std::size_t> shape, std::span<const float> data);
std::vector<std::uint8_t> encode_npy(std::span<const std::size_t> shape, std::span<const float> data);

/// (C, H, W) float tensor.
FeatureGrid read_tensor(const fs::path& path);
void write_tensor(const FeatureGrid& grid, const fs::path& path);

/// (L, H, W) soft score tensor.
LabelGrid read_scores(const fs::path& path);
void write_scores(const LabelGrid& scores, const fs::path& path);

// --- PNG masks -------------------------------------------------------------

using Palette = std::vector<std::array<std::uint8_t, 3>>;

/// 256-entry palette used by DAVIS annotations (index 0 black, 1 red, 2 green, ...).
Palette davis_palette();

/// 8-bit palette-indexed (or 8-bit grayscale) PNG; pixel value = class id.
ClassMap read_mask(const fs::path& path);
void write_mask(const ClassMap& map, const fs::path& path, const Palette& palette = davis_palette());

// --- Keypoints -------------------------------------------------------------

/// JSON: {"format_version": 1, "keypoints": [{"class": 0, "x": 1.5, "y": 2.0, "visible": true}, ...]}
/// x is the column coordinate and y the row coordinate, in pixels.
KeypointSet read_keypoints(const fs::path& path);
void write_keypoints(const KeypointSet& keypoints, const fs::path& path);

// --- Manifest --------------------------------------------------------------

inline constexpr int kManifestFormatVersion = 1;

enum class TaskKind { Region, Semantic, Keypoint };
std::string to_string(TaskKind kind);
TaskKind parse_task(const std::string& s);

struct FrameEntry {
  std::size_t index = 0;
  fs::path features;                  // resolved path
  std::optional<fs::path> annotation;  // resolved path
  std::size_t height = 0;             // original resolution in pixels
  std::size_t width = 0;
};

struct SequenceManifest {
  std::string id;
  TaskKind task = TaskKind::Region;
  std::size_t annotation_stride = 1;
  std::size_t classes = 0;  // 0: derived from the first annotation
  std::vector<FrameEntry> frames;
};

struct Manifest {
  int format_version = kManifestFormatVersion;
  fs::path root;  // directory the relative paths resolve against
  std::vector<SequenceManifest> sequences;
};

/// Loads and validates: strictly increasing frame indices, annotated first frame,
/// existing files, known format version.
Manifest read_manifest(const fs::path& path);
/// Paths are written relative to the manifest directory.
void write_manifest(const Manifest& manifest, const fs::path& path);

// --- Reports ---------------------------------------------------------------

/// sequence,object,J,F rows followed by an "ALL,,J_M,F_M" row.
std::string format_report(const MetricsReport& report);
/// metric,value rows: J_M, J_O, F_M, F_O, JF_M, then PCK@alpha and mIoU when present.
std::string format_summary(const MetricsReport& report);
void write_report(const MetricsReport& report, const fs::path& path);
void write_summary(const MetricsReport& report, const fs::path& path);

/// Fixed six-decimal rendering used in every CSV.
std::string format_number(double v);

void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);

}  // namespace labelprop::io
