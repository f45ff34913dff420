#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "labelprop/errors.hpp"
#include "labelprop/io.hpp"

namespace labelprop::io {
namespace {

using nlohmann::json;

json parse_json(const fs::path& path) {
  const std::string text = read_text(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": invalid JSON (" + e.what() + ")");
  }
}

template <typename T>
T field(const json& obj, const char* key, const fs::path& origin, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key))
    throw FormatError(origin.string() + ": " + where + " is missing '" + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw FormatError(origin.string() + ": " + where + " has a malformed '" + key + "'");
  }
}

void check_version(const json& doc, const fs::path& path) {
  const int version = field<int>(doc, "format_version", path, "document");
  if (version != kManifestFormatVersion)
    throw FormatError(path.string() + ": unsupported format_version " + std::to_string(version));
}

}  // namespace

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  out << text;
  if (!out) throw DataError(path.string() + ": write failed");
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// --- Keypoints ---------------------------------------------------------------

KeypointSet read_keypoints(const fs::path& path) {
  const json doc = parse_json(path);
  check_version(doc, path);
  if (!doc.contains("keypoints") || !doc["keypoints"].is_array())
    throw FormatError(path.string() + ": 'keypoints' must be an array");
  KeypointSet out;
  for (const auto& item : doc["keypoints"]) {
    Keypoint p;
    p.class_id = field<std::int32_t>(item, "class", path, "keypoint");
    p.x = field<double>(item, "x", path, "keypoint");
    p.y = field<double>(item, "y", path, "keypoint");
    p.visible = field<bool>(item, "visible", path, "keypoint");
    if (p.class_id < 0) throw FormatError(path.string() + ": negative keypoint class");
    if (out.find(p.class_id) != nullptr)
      throw FormatError(path.string() + ": duplicate keypoint class " + std::to_string(p.class_id));
    out.points.push_back(p);
  }
  return out;
}

void write_keypoints(const KeypointSet& keypoints, const fs::path& path) {
  json doc;
  doc["format_version"] = kManifestFormatVersion;
  doc["keypoints"] = json::array();
  for (const auto& p : keypoints.points)
    doc["keypoints"].push_back({{"class", p.class_id}, {"x", p.x}, {"y", p.y}, {"visible", p.visible}});
  write_text(path, doc.dump(2) + "\n");
}

// --- Manifest ----------------------------------------------------------------

std::string to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::Region: return "region";
    case TaskKind::Semantic: return "semantic";
    case TaskKind::Keypoint: return "keypoint";
  }
  return "region";
}

TaskKind parse_task(const std::string& s) {
  if (s == "region") return TaskKind::Region;
  if (s == "semantic") return TaskKind::Semantic;
  if (s == "keypoint") return TaskKind::Keypoint;
  throw FormatError("unknown task kind '" + s + "' (expected region, semantic or keypoint)");
}

Manifest read_manifest(const fs::path& path) {
  const json doc = parse_json(path);
  check_version(doc, path);
  Manifest m;
  m.root = path.parent_path();
  if (!doc.contains("sequences") || !doc["sequences"].is_array())
    throw FormatError(path.string() + ": 'sequences' must be an array");
  for (const auto& sj : doc["sequences"]) {
    SequenceManifest seq;
    seq.id = field<std::string>(sj, "id", path, "sequence");
    const std::string where = "sequence '" + seq.id + "'";
    try {
      seq.task = parse_task(sj.value("task", std::string("region")));
    } catch (const FormatError& e) {
      throw FormatError(path.string() + ": " + where + ": " + e.what());
    }
    seq.annotation_stride = sj.value("annotation_stride", std::size_t{1});
    seq.classes = sj.value("classes", std::size_t{0});
    if (seq.annotation_stride == 0) throw FormatError(path.string() + ": " + where + " has annotation_stride 0");
    if (!sj.contains("frames") || !sj["frames"].is_array() || sj["frames"].empty())
      throw FormatError(path.string() + ": " + where + " has no frames");
    for (const auto& fj : sj["frames"]) {
      FrameEntry f;
      f.index = field<std::size_t>(fj, "index", path, where + " frame");
      f.features = m.root / field<std::string>(fj, "features", path, where + " frame");
      if (fj.contains("annotation") && !fj["annotation"].is_null())
        f.annotation = m.root / field<std::string>(fj, "annotation", path, where + " frame");
      f.height = field<std::size_t>(fj, "height", path, where + " frame");
      f.width = field<std::size_t>(fj, "width", path, where + " frame");
      if (f.height == 0 || f.width == 0)
        throw FormatError(path.string() + ": " + where + " frame " + std::to_string(f.index) + " has zero size");
      if (!seq.frames.empty() && f.index <= seq.frames.back().index)
        throw FormatError(path.string() + ": " + where + " frame indices must be strictly increasing");
      if (!fs::exists(f.features)) throw DataError(path.string() + ": missing feature file " + f.features.string());
      if (f.annotation && !fs::exists(*f.annotation))
        throw DataError(path.string() + ": missing annotation file " + f.annotation->string());
      seq.frames.push_back(std::move(f));
    }
    if (!seq.frames.front().annotation)
      throw FormatError(path.string() + ": " + where + " first frame has no annotation");
    if (seq.task == TaskKind::Semantic && seq.classes == 0)
      throw FormatError(path.string() + ": " + where + " is semantic and must declare 'classes'");
    for (const auto& other : m.sequences)
      if (other.id == seq.id) throw FormatError(path.string() + ": duplicate sequence id '" + seq.id + "'");
    m.sequences.push_back(std::move(seq));
  }
  return m;
}

void write_manifest(const Manifest& manifest, const fs::path& path) {
  const fs::path base = path.parent_path().empty() ? fs::path(".") : path.parent_path();
  auto rel = [&](const fs::path& p) { return fs::relative(p, base).generic_string(); };
  json doc;
  doc["format_version"] = manifest.format_version;
  doc["sequences"] = json::array();
  for (const auto& seq : manifest.sequences) {
    json sj;
    sj["id"] = seq.id;
    sj["task"] = to_string(seq.task);
    sj["annotation_stride"] = seq.annotation_stride;
    if (seq.classes > 0) sj["classes"] = seq.classes;
    sj["frames"] = json::array();
    for (const auto& f : seq.frames) {
      json fj;
      fj["index"] = f.index;
      fj["features"] = rel(f.features);
      if (f.annotation) fj["annotation"] = rel(*f.annotation);
      fj["height"] = f.height;
      fj["width"] = f.width;
      sj["frames"].push_back(std::move(fj));
    }
    doc["sequences"].push_back(std::move(sj));
  }
  write_text(path, doc.dump(2) + "\n");
}

// --- Reports -----------------------------------------------------------------

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string format_report(const MetricsReport& report) {
  std::string out = "sequence,object,J,F\n";
  for (const auto& s : report.per_sequence)
    out += s.sequence + "," + std::to_string(s.object) + "," + format_number(s.j) + "," + format_number(s.f) + "\n";
  out += "ALL,," + format_number(report.j_mean) + "," + format_number(report.f_mean) + "\n";
  return out;
}

std::string format_summary(const MetricsReport& report) {
  std::string out = "metric,value\n";
  out += "J_M," + format_number(report.j_mean) + "\n";
  out += "J_O," + format_number(report.j_recall) + "\n";
  out += "F_M," + format_number(report.f_mean) + "\n";
  out += "F_O," + format_number(report.f_recall) + "\n";
  out += "JF_M," + format_number(report.jf_mean) + "\n";
  for (const auto& p : report.pck) {
    char name[32];
    std::snprintf(name, sizeof name, "PCK@%g", p.alpha);
    out += std::string(name) + "," + format_number(p.value) + "\n";
  }
  if (report.miou) out += "mIoU," + format_number(*report.miou) + "\n";
  return out;
}

void write_report(const MetricsReport& report, const fs::path& path) { write_text(path, format_report(report)); }

void write_summary(const MetricsReport& report, const fs::path& path) { write_text(path, format_summary(report)); }

}  // namespace labelprop::io
