#include <algorithm>
#include <cstdlib>
#include <set>
#include <thread>

#include "json.hpp"
#include "labelprop/errors.hpp"
#include "labelprop/harness.hpp"

namespace labelprop::harness {
namespace {

using nlohmann::json;

json parse(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(origin + ": invalid JSON (" + e.what() + ")");
  }
}

void allow_keys(const json& obj, std::initializer_list<const char*> keys, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return key == k; }))
      throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
T get(const json& obj, const char* key, const std::string& where) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + ": malformed '" + key + "'");
  }
}

template <typename T>
void maybe(const json& obj, const char* key, const std::string& where, T& out) {
  if (obj.contains(key)) out = get<T>(obj, key, where);
}

Aggregation parse_aggregation(const std::string& s) {
  if (s == "per_frame") return Aggregation::PerFrame;
  if (s == "overall") return Aggregation::Overall;
  throw ConfigError("aggregation must be per_frame or overall, got '" + s + "'");
}

SoftmaxOrder parse_order(const std::string& s) {
  if (s == "before_mask") return SoftmaxOrder::BeforeMask;
  if (s == "after_mask") return SoftmaxOrder::AfterMask;
  throw ConfigError("softmax_order must be before_mask or after_mask, got '" + s + "'");
}

RegionMetric parse_metric(const std::string& s) {
  if (s == "chebyshev") return RegionMetric::Chebyshev;
  if (s == "euclidean") return RegionMetric::Euclidean;
  throw ConfigError("metric must be chebyshev or euclidean, got '" + s + "'");
}

Localization parse_localization(const json& j, const std::string& where) {
  Localization loc;
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "none") return loc;
    if (s == "fixed_region") {
      loc.mode = LocalizationMode::FixedRegion;
      return loc;
    }
    if (s == "track") {
      loc.mode = LocalizationMode::Track;
      return loc;
    }
    throw ConfigError(where + ": unknown localization '" + s + "'");
  }
  allow_keys(j, {"mode", "radius", "metric", "threshold", "margin"}, where);
  const auto mode = j.contains("mode") ? get<std::string>(j, "mode", where) : std::string("none");
  loc = parse_localization(json(mode), where);
  maybe(j, "radius", where, loc.radius);
  if (j.contains("metric")) loc.metric = parse_metric(get<std::string>(j, "metric", where));
  maybe(j, "threshold", where, loc.track_threshold);
  maybe(j, "margin", where, loc.track_margin);
  return loc;
}

json localization_json(const Localization& loc) {
  json j;
  j["mode"] = to_string(loc.mode);
  if (loc.mode == LocalizationMode::FixedRegion) {
    j["radius"] = loc.radius;
    j["metric"] = to_string(loc.metric);
  } else if (loc.mode == LocalizationMode::Track) {
    j["threshold"] = loc.track_threshold;
    j["margin"] = loc.track_margin;
  }
  return j;
}

double parse_temperature(const json& j, const std::string& where) {
  const bool t = j.contains("temperature");
  const bool inv = j.contains("inv_temperature");
  if (t && inv) throw ConfigError(where + ": give either temperature or inv_temperature, not both");
  if (inv) {
    const double v = get<double>(j, "inv_temperature", where);
    if (!(v > 0.0)) throw ConfigError(where + ": inv_temperature must be positive");
    return 1.0 / v;
  }
  return t ? get<double>(j, "temperature", where) : PropagationConfig{}.temperature;
}

EvaluationOptions parse_evaluation(const json& j, const std::string& where) {
  EvaluationOptions e;
  allow_keys(j, {"boundary_tolerance", "averaging", "pck_alphas", "ignore"}, where);
  if (j.contains("boundary_tolerance") && !j["boundary_tolerance"].is_null()) {
    e.boundary_tolerance = get<double>(j, "boundary_tolerance", where);
    if (!(*e.boundary_tolerance >= 0.0)) throw ConfigError(where + ": boundary_tolerance must be non-negative");
  }
  if (j.contains("averaging")) {
    const auto a = get<std::string>(j, "averaging", where);
    if (a == "per_object")
      e.averaging = DavisAveraging::PerObject;
    else if (a == "per_sequence")
      e.averaging = DavisAveraging::PerSequence;
    else
      throw ConfigError(where + ": averaging must be per_object or per_sequence");
  }
  maybe(j, "pck_alphas", where, e.pck_alphas);
  for (double a : e.pck_alphas)
    if (!(a > 0.0)) throw ConfigError(where + ": pck alphas must be positive");
  maybe(j, "ignore", where, e.ignore);
  return e;
}

RunConfig parse_run(const json& j, const std::string& where) {
  RunConfig rc;
  allow_keys(j, {"aggregation", "temperature", "inv_temperature", "k", "context", "include_first", "localization",
                 "softmax_order", "normalize_features", "evaluation"},
             where);
  auto& p = rc.propagation;
  if (j.contains("aggregation")) p.aggregation = parse_aggregation(get<std::string>(j, "aggregation", where));
  p.temperature = parse_temperature(j, where);
  maybe(j, "k", where, p.k);
  maybe(j, "context", where, p.context);
  maybe(j, "include_first", where, p.include_first);
  if (j.contains("localization")) p.localization = parse_localization(j["localization"], where + ".localization");
  if (j.contains("softmax_order")) p.softmax_order = parse_order(get<std::string>(j, "softmax_order", where));
  maybe(j, "normalize_features", where, p.normalize_features);
  if (j.contains("evaluation")) rc.evaluation = parse_evaluation(j["evaluation"], where + ".evaluation");
  return rc;
}

template <typename T, typename Fn>
std::vector<T> list_or_default(const json& j, const char* key, const std::string& where, T fallback, Fn&& parse_one) {
  if (!j.contains(key)) return {fallback};
  const json& v = j[key];
  std::vector<T> out;
  if (!v.is_array()) {
    out.push_back(parse_one(v));
  } else {
    for (const auto& item : v) out.push_back(parse_one(item));
  }
  if (out.empty()) throw ConfigError(where + ": '" + key + "' must not be empty");
  return out;
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text, const std::string& origin) {
  const json j = parse(json_text, origin);
  RunConfig rc = parse_run(j, origin);
  rc.propagation.validate();
  return rc;
}

RunConfig load_run_config(const fs::path& path) { return parse_run_config(io::read_text(path), path.string()); }

std::string dump_run_config(const RunConfig& rc) {
  const auto& p = rc.propagation;
  json j;
  j["aggregation"] = to_string(p.aggregation);
  j["temperature"] = p.temperature;
  j["k"] = p.k;
  j["context"] = p.context;
  j["include_first"] = p.include_first;
  j["localization"] = localization_json(p.localization);
  j["softmax_order"] = to_string(p.softmax_order);
  j["normalize_features"] = p.normalize_features;
  json e;
  const auto& ev = rc.evaluation;
  e["boundary_tolerance"] = ev.boundary_tolerance ? json(*ev.boundary_tolerance) : json(nullptr);
  e["averaging"] = ev.averaging == DavisAveraging::PerObject ? "per_object" : "per_sequence";
  e["pck_alphas"] = ev.pck_alphas;
  e["ignore"] = ev.ignore;
  j["evaluation"] = e;
  return j.dump(2) + "\n";
}

std::vector<PropagationConfig> SweepGrid::expand() const {
  std::vector<PropagationConfig> out;
  for (double t : temperatures)
    for (std::size_t k : ks)
      for (std::size_t n : contexts)
        for (Aggregation a : aggregations)
          for (const Localization& loc : localizations) {
            PropagationConfig c = base.propagation;
            c.temperature = t;
            c.k = k;
            c.context = n;
            c.aggregation = a;
            c.localization = loc;
            out.push_back(c);
          }
  return out;
}

std::size_t SweepGrid::size() const {
  return temperatures.size() * ks.size() * contexts.size() * aggregations.size() * localizations.size();
}

std::vector<std::string> SweepGrid::swept_axes() const {
  std::vector<std::string> axes;
  if (temperatures.size() > 1) axes.emplace_back("T");
  if (ks.size() > 1) axes.emplace_back("k");
  if (contexts.size() > 1) axes.emplace_back("n");
  return axes;
}

SweepGrid parse_sweep_grid(const std::string& json_text, const std::string& origin) {
  const json j = parse(json_text, origin);
  allow_keys(j, {"base", "temperature", "inv_temperature", "k", "context", "aggregation", "localization"}, origin);
  SweepGrid g;
  if (j.contains("base")) g.base = parse_run(j["base"], origin + ".base");
  const auto& b = g.base.propagation;
  if (j.contains("temperature") && j.contains("inv_temperature"))
    throw ConfigError(origin + ": give either temperature or inv_temperature lists, not both");
  if (j.contains("inv_temperature")) {
    g.temperatures = list_or_default(j, "inv_temperature", origin, 0.0, [&](const json& v) {
      const double inv = v.get<double>();
      if (!(inv > 0.0)) throw ConfigError(origin + ": inv_temperature values must be positive");
      return 1.0 / inv;
    });
  } else {
    g.temperatures = list_or_default(j, "temperature", origin, b.temperature, [&](const json& v) {
      const double t = v.get<double>();
      require_positive_temperature(t);
      return t;
    });
  }
  try {
    g.ks = list_or_default(j, "k", origin, b.k, [](const json& v) { return v.get<std::size_t>(); });
    g.contexts = list_or_default(j, "context", origin, b.context, [](const json& v) { return v.get<std::size_t>(); });
    g.aggregations = list_or_default(j, "aggregation", origin, b.aggregation,
                                     [](const json& v) { return parse_aggregation(v.get<std::string>()); });
  } catch (const json::exception& e) {
    throw ConfigError(origin + ": malformed sweep list (" + e.what() + ")");
  }
  g.localizations = list_or_default(j, "localization", origin, b.localization,
                                    [&](const json& v) { return parse_localization(v, origin + ".localization"); });
  return g;
}

SweepGrid load_sweep_grid(const fs::path& path) { return parse_sweep_grid(io::read_text(path), path.string()); }

SynthDataset parse_synth_spec(const std::string& json_text, const std::string& origin) {
  const json j = parse(json_text, origin);
  allow_keys(j,
             {"preset", "height", "width", "frames", "objects", "identity_dims", "position_dims", "identity_amplitude",
              "position_amplitude", "noise", "seed", "pixel_scale", "sequences"},
             origin);
  SynthDataset ds;
  SynthSpec& s = ds.spec;
  if (j.contains("preset")) {
    const auto preset = get<std::string>(j, "preset", origin);
    if (preset != "three_objects") throw ConfigError(origin + ": unknown preset '" + preset + "'");
    if (j.contains("objects")) throw ConfigError(origin + ": a preset defines its own objects");
    s = three_object_spec(j.value("height", std::size_t{32}), j.value("width", std::size_t{32}),
                          j.value("frames", std::size_t{30}), j.value("noise", 0.1), j.value("seed", std::uint64_t{0}));
  }
  maybe(j, "height", origin, s.height);
  maybe(j, "width", origin, s.width);
  maybe(j, "frames", origin, s.frames);
  maybe(j, "identity_dims", origin, s.identity_dims);
  maybe(j, "position_dims", origin, s.position_dims);
  maybe(j, "identity_amplitude", origin, s.identity_amplitude);
  maybe(j, "position_amplitude", origin, s.position_amplitude);
  maybe(j, "noise", origin, s.noise);
  maybe(j, "seed", origin, s.seed);
  maybe(j, "pixel_scale", origin, s.pixel_scale);
  maybe(j, "sequences", origin, ds.sequences);
  if (ds.sequences == 0) throw ConfigError(origin + ": sequences must be at least 1");
  if (j.contains("objects")) {
    s.objects.clear();
    for (const auto& o : j["objects"]) {
      const std::string where = origin + ".objects";
      allow_keys(o, {"shape", "rows", "cols", "radius", "row", "col", "velocity", "class"}, where);
      SynthObject obj;
      const auto shape = o.value("shape", std::string("rectangle"));
      if (shape == "rectangle")
        obj.shape = ShapeKind::Rectangle;
      else if (shape == "disk")
        obj.shape = ShapeKind::Disk;
      else
        throw ConfigError(where + ": shape must be rectangle or disk");
      maybe(o, "rows", where, obj.rows);
      maybe(o, "cols", where, obj.cols);
      maybe(o, "radius", where, obj.radius);
      maybe(o, "row", where, obj.row);
      maybe(o, "col", where, obj.col);
      if (o.contains("velocity")) {
        const auto v = get<std::vector<double>>(o, "velocity", where);
        if (v.size() != 2) throw ConfigError(where + ": velocity must be [rows, cols] per frame");
        obj.velocity_row = v[0];
        obj.velocity_col = v[1];
      }
      maybe(o, "class", where, obj.class_id);
      s.objects.push_back(obj);
    }
  }
  s.validate();
  return ds;
}

SynthDataset load_synth_spec(const fs::path& path) { return parse_synth_spec(io::read_text(path), path.string()); }

std::size_t default_workers() {
  if (const char* env = std::getenv(kWorkersEnv); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end != nullptr && *end == '\0' && v > 0) return v;
    throw ConfigError(std::string(kWorkersEnv) + " must be a positive integer, got '" + env + "'");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace labelprop::harness
