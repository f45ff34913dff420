#include <iostream>

#include "CLI11.hpp"
#include "labelprop/errors.hpp"
#include "labelprop/harness.hpp"

using namespace labelprop;
using namespace labelprop::harness;

namespace {

struct Flags {
  std::string manifest, config, out, predictions;
  std::size_t workers = 0;
  std::uint64_t seed = 0;
};

CLI::App* subcommand(CLI::App& app, const char* name, const char* about, Flags& f, bool predictions, bool seed) {
  auto* sub = app.add_subcommand(name, about);
  sub->add_option("--manifest", f.manifest, "dataset manifest (JSON)");
  sub->add_option("--config", f.config, "run, sweep or synth config (JSON)");
  sub->add_option("--out", f.out, "output directory");
  sub->add_option("--workers", f.workers, std::string("worker threads (default: ") + kWorkersEnv + " or all cores)")
      ->check(CLI::PositiveNumber);
  if (predictions) sub->add_option("--predictions", f.predictions, "directory written by propagate");
  if (seed) sub->add_option("--seed", f.seed, "override the generator seed");
  return sub;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Label propagation over precomputed feature maps"};
  app.require_subcommand(1);
  Flags f;
  auto* propagate = subcommand(app, "propagate", "propagate first-frame labels through each sequence", f, false, false);
  auto* evaluate = subcommand(app, "evaluate", "score predictions against the annotations", f, true, false);
  auto* sweep = subcommand(app, "sweep", "propagate and evaluate over a parameter grid", f, false, false);
  auto* synth = subcommand(app, "synth", "write a synthetic moving-shapes dataset", f, false, true);
  auto* trace = subcommand(app, "trace", "per-frame label mass of saved score maps", f, true, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    CommandOptions opts;
    opts.manifest = f.manifest;
    opts.config = f.config;
    opts.out = f.out;
    opts.predictions = f.predictions;
    opts.workers = f.workers > 0 ? f.workers : default_workers();
    if (synth->count("--seed") > 0) opts.seed = f.seed;

    if (propagate->parsed()) return cmd_propagate(opts, std::cout);
    if (evaluate->parsed()) return cmd_evaluate(opts, std::cout);
    if (sweep->parsed()) return cmd_sweep(opts, std::cout);
    if (synth->parsed()) return cmd_synth(opts, std::cout);
    if (trace->parsed()) return cmd_trace(opts, std::cout);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kUsage;
}
