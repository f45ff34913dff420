#include <algorithm>
#include <cctype>
#include <cstdio>
#include <map>
#include <ostream>

#include "labelprop/errors.hpp"
#include "labelprop/harness.hpp"

namespace labelprop::harness {
namespace {

void require(const fs::path& p, const char* flag, const char* command) {
  if (p.empty()) throw ConfigError(std::string(command) + " requires " + flag);
}

std::string number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string csv_safe(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

std::string file_safe(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-') out += c;
    else if (!out.empty() && out.back() != '_') out += '_';
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out;
}

// In-memory predictions for one sequence, rendered exactly as write_predictions would.
PredictionSource memory_predictions(const io::SequenceManifest& seq, const std::vector<LabelGrid>& outputs) {
  auto locate = [&seq, &outputs](const io::FrameEntry& f) -> const LabelGrid& {
    for (std::size_t i = 0; i < seq.frames.size(); ++i)
      if (seq.frames[i].index == f.index) return outputs[i];
    throw DataError("sequence '" + seq.id + "': no prediction for frame " + std::to_string(f.index));
  };
  PredictionSource src;
  src.mask = [locate](const io::SequenceManifest&, const io::FrameEntry& f) {
    return prediction_mask(locate(f), f.height, f.width);
  };
  src.keypoints = [locate](const io::SequenceManifest&, const io::FrameEntry& f) {
    return prediction_keypoints(locate(f), f.height, f.width);
  };
  return src;
}

}  // namespace

int cmd_propagate(const CommandOptions& opts, std::ostream& log) {
  require(opts.manifest, "--manifest", "propagate");
  require(opts.out, "--out", "propagate");
  const RunConfig rc = opts.config.empty() ? RunConfig{} : load_run_config(opts.config);
  rc.propagation.validate();
  const io::Manifest manifest = io::read_manifest(opts.manifest);
  fs::create_directories(opts.out);
  io::write_text(opts.out / "config.json", dump_run_config(rc));
  std::vector<std::size_t> frames(manifest.sequences.size());
  run_jobs(manifest.sequences.size(), opts.workers, [&](std::size_t i) {
    const auto& seq = manifest.sequences[i];
    const LoadedSequence loaded = load_sequence(seq);
    write_predictions(seq, run_sequence(loaded, rc.propagation), opts.out);
    frames[i] = seq.frames.size();
  });
  for (std::size_t i = 0; i < frames.size(); ++i)
    log << manifest.sequences[i].id << ": " << frames[i] << " frames\n";
  return kOk;
}

int cmd_evaluate(const CommandOptions& opts, std::ostream& log) {
  require(opts.manifest, "--manifest", "evaluate");
  const fs::path preds = opts.predictions.empty() ? opts.out : opts.predictions;
  require(preds, "--predictions", "evaluate");
  const RunConfig rc = opts.config.empty() ? RunConfig{} : load_run_config(opts.config);
  const io::Manifest manifest = io::read_manifest(opts.manifest);
  require_predictions(manifest, preds);
  const PredictionSource source = disk_predictions(preds);
  std::vector<SequenceEvaluation> parts(manifest.sequences.size());
  run_jobs(parts.size(), opts.workers,
           [&](std::size_t i) { parts[i] = evaluate_sequence(manifest.sequences[i], source, rc.evaluation); });
  const MetricsReport report = finish_report(parts, rc.evaluation);
  if (!opts.out.empty()) {
    fs::create_directories(opts.out);
    io::write_report(report, opts.out / "report.csv");
    io::write_summary(report, opts.out / "summary.csv");
  }
  log << io::format_summary(report);
  return kOk;
}

std::vector<SweepRow> run_sweep(const SweepGrid& grid, const io::Manifest& manifest, std::size_t workers) {
  const auto configs = grid.expand();
  std::vector<SweepRow> rows(configs.size());
  std::vector<std::size_t> valid;
  for (std::size_t c = 0; c < configs.size(); ++c) {
    rows[c].config = configs[c];
    try {
      configs[c].validate();
      valid.push_back(c);
    } catch (const ConfigError& e) {
      rows[c].error = e.what();
    }
  }

  const std::size_t nseq = manifest.sequences.size();
  std::vector<LoadedSequence> loaded(nseq);
  run_jobs(nseq, workers, [&](std::size_t s) { loaded[s] = load_sequence(manifest.sequences[s]); });

  std::vector<std::vector<SequenceEvaluation>> parts(configs.size(), std::vector<SequenceEvaluation>(nseq));
  std::vector<std::string> errors(valid.size() * nseq);
  run_jobs(valid.size() * nseq, workers, [&](std::size_t job) {
    const std::size_t c = valid[job / nseq];
    const std::size_t s = job % nseq;
    const auto& seq = manifest.sequences[s];
    try {
      const auto outputs = run_sequence(loaded[s], configs[c]);
      parts[c][s] = evaluate_sequence(seq, memory_predictions(seq, outputs), grid.base.evaluation);
    } catch (const std::exception& e) {
      errors[job] = seq.id + ": " + e.what();
    }
  });

  for (std::size_t v = 0; v < valid.size(); ++v) {
    const std::size_t c = valid[v];
    for (std::size_t s = 0; s < nseq && rows[c].error.empty(); ++s) rows[c].error = errors[v * nseq + s];
    if (rows[c].error.empty()) rows[c].report = finish_report(parts[c], grid.base.evaluation);
  }
  return rows;
}

std::string format_sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "T,k,n,aggregation,localization,J_M,J_O,F_M,F_O,JF_M,PCK,mIoU,status\n";
  for (const auto& r : rows) {
    const auto& c = r.config;
    out += number(c.temperature) + "," + std::to_string(c.k) + "," + std::to_string(c.context) + "," +
           to_string(c.aggregation) + "," + csv_safe(describe(c.localization)) + ",";
    if (r.report) {
      const auto& m = *r.report;
      out += io::format_number(m.j_mean) + "," + io::format_number(m.j_recall) + "," + io::format_number(m.f_mean) +
             "," + io::format_number(m.f_recall) + "," + io::format_number(m.jf_mean) + ",";
      out += (m.pck.empty() ? "" : io::format_number(m.pck.front().value)) + ",";
      out += (m.miou ? io::format_number(*m.miou) : "") + ",ok\n";
    } else {
      out += ",,,,,,,error: " + csv_safe(r.error) + "\n";
    }
  }
  return out;
}

void write_plot_data(const SweepGrid& grid, const std::vector<SweepRow>& rows, const fs::path& dir) {
  fs::create_directories(dir);
  for (const auto& axis : grid.swept_axes()) {
    for (auto agg : grid.aggregations)
      for (const auto& loc : grid.localizations) {
        const std::string loc_name = describe(loc);
        std::map<double, std::pair<double, std::size_t>> acc;
        for (const auto& r : rows) {
          if (!r.report || r.config.aggregation != agg || describe(r.config.localization) != loc_name) continue;
          const double x = axis == "T" ? r.config.temperature
                           : axis == "k" ? static_cast<double>(r.config.k)
                                         : static_cast<double>(r.config.context);
          auto& [sum, n] = acc[x];
          sum += r.report->jf_mean;
          ++n;
        }
        if (acc.empty()) continue;
        std::string text = axis + ",JF_M\n";
        for (const auto& [x, v] : acc)
          text += number(x) + "," + io::format_number(v.first / static_cast<double>(v.second)) + "\n";
        io::write_text(dir / ("plot_" + axis + "_" + to_string(agg) + "_" + file_safe(loc_name) + ".csv"), text);
      }
  }
}

int cmd_sweep(const CommandOptions& opts, std::ostream& log) {
  require(opts.manifest, "--manifest", "sweep");
  require(opts.config, "--config", "sweep");
  require(opts.out, "--out", "sweep");
  const SweepGrid grid = load_sweep_grid(opts.config);
  const io::Manifest manifest = io::read_manifest(opts.manifest);
  const auto rows = run_sweep(grid, manifest, opts.workers);
  fs::create_directories(opts.out);
  io::write_text(opts.out / "sweep.csv", format_sweep_csv(rows));
  write_plot_data(grid, rows, opts.out);
  std::size_t failed = 0;
  for (const auto& r : rows)
    if (!r.report) {
      ++failed;
      log << "failed: T=" << number(r.config.temperature) << " k=" << r.config.k << " n=" << r.config.context << " "
          << to_string(r.config.aggregation) << " " << describe(r.config.localization) << ": " << r.error << "\n";
    }
  log << rows.size() - failed << "/" << rows.size() << " configurations evaluated\n";
  return failed > 0 ? kPartialSweep : kOk;
}

fs::path write_synthetic_dataset(const SynthDataset& dataset, const fs::path& out) {
  dataset.spec.validate();
  io::Manifest manifest;
  manifest.root = out;
  for (std::size_t i = 0; i < dataset.sequences; ++i) {
    SynthSpec spec = dataset.spec;
    spec.seed = dataset.spec.seed + i;
    const SynthVideo video = gen_synthetic_video(spec);
    char id[32];
    std::snprintf(id, sizeof id, "synth_%03zu", i);
    io::SequenceManifest seq;
    seq.id = id;
    seq.task = io::TaskKind::Region;
    seq.classes = video.classes;
    const fs::path fdir = out / "features" / seq.id;
    const fs::path adir = out / "annotations" / seq.id;
    fs::create_directories(fdir);
    fs::create_directories(adir);
    for (std::size_t t = 0; t < spec.frames; ++t) {
      io::FrameEntry f;
      f.index = t;
      f.features = fdir / (frame_stem(t) + ".npy");
      f.annotation = adir / (frame_stem(t) + ".png");
      f.height = video.pixel_masks[t].height;
      f.width = video.pixel_masks[t].width;
      io::write_tensor(video.features[t], f.features);
      io::write_mask(video.pixel_masks[t], *f.annotation);
      seq.frames.push_back(std::move(f));
    }
    manifest.sequences.push_back(std::move(seq));
  }
  const fs::path path = out / "manifest.json";
  io::write_manifest(manifest, path);
  return path;
}

int cmd_synth(const CommandOptions& opts, std::ostream& log) {
  require(opts.out, "--out", "synth");
  SynthDataset ds;
  if (opts.config.empty())
    ds.spec = three_object_spec(32, 32, 30, 0.1, 0);
  else
    ds = load_synth_spec(opts.config);
  if (opts.seed) ds.spec.seed = *opts.seed;
  const fs::path path = write_synthetic_dataset(ds, opts.out);
  log << "wrote " << ds.sequences << " sequence(s), manifest " << path.string() << "\n";
  return kOk;
}

std::string trace_csv(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("prediction directory " + dir.string() + " does not exist");
  std::vector<fs::path> seqs;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory()) seqs.push_back(e.path());
  std::sort(seqs.begin(), seqs.end());
  std::string out = "sequence,frame,label_mass\n";
  std::size_t rows = 0;
  for (const auto& s : seqs) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(s))
      if (e.is_regular_file() && e.path().extension() == ".npy") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      out += s.filename().string() + "," + f.stem().string() + "," + io::format_number(label_mass(io::read_scores(f))) +
             "\n";
      ++rows;
    }
  }
  if (rows == 0) throw DataError("no score files (<sequence>/<frame>.npy) under " + dir.string());
  return out;
}

int cmd_trace(const CommandOptions& opts, std::ostream& log) {
  const fs::path dir = opts.predictions.empty() ? opts.out : opts.predictions;
  require(dir, "--predictions", "trace");
  const std::string csv = trace_csv(dir);
  if (!opts.predictions.empty() && !opts.out.empty()) {
    fs::create_directories(opts.out);
    io::write_text(opts.out / "trace.csv", csv);
  } else {
    log << csv;
  }
  return kOk;
}

}  // namespace labelprop::harness
