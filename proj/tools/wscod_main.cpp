// Command-line front end: segment, choose, evaluate, run-all, synth.

#include <cstdlib>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "wscod/pipeline.hpp"

namespace {

using namespace wscod;

struct RunFlags {
  std::string config;
  std::string manifest;
  std::string output;
  std::string backend;
  std::string endpoint;
  std::string faults;
  std::string prompt_template;
  std::optional<double> alpha, beta, delta, sigma, timeout;
  std::optional<int> workers;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--config", f.config, "JSON run configuration");
  cmd->add_option("--manifest", f.manifest, "line-delimited JSON dataset manifest");
  cmd->add_option("--output", f.output, "output directory");
  cmd->add_option("--backend", f.backend, "oracle | sidecar")->check(CLI::IsMember({"oracle", "sidecar"}));
  cmd->add_option("--endpoint", f.endpoint, "sidecar base URL");
  cmd->add_option("--timeout", f.timeout, "sidecar request timeout, seconds");
  cmd->add_option("--faults", f.faults,
                  "oracle fault plan: full-image-box,drop-detections,background-false-positive");
  cmd->add_option("--workers", f.workers, "sample-parallel workers");
  cmd->add_option("--alpha", f.alpha, "box coverage ceiling (default 0.95)");
  cmd->add_option("--beta", f.beta, "box regeneration scale (default 0.20)");
  cmd->add_option("--delta", f.delta, "mask erasure ceiling (default 0.80)");
  cmd->add_option("--sigma", f.sigma, "reverse-blur sigma in pixels (default 50)");
  cmd->add_option("--prompt-template", f.prompt_template, "scorer prompt (default \"A {text}\")");
}

RunConfig build_config(const RunFlags& f) {
  RunConfig c = f.config.empty() ? RunConfig{} : load_config(f.config);
  if (const char* env = std::getenv(kSidecarEnv); env != nullptr && *env != '\0') {
    c.sidecar.endpoint = env;
  }
  if (!f.manifest.empty()) c.manifest = f.manifest;
  if (!f.output.empty()) c.output = f.output;
  if (!f.backend.empty()) c.backend = f.backend == "sidecar" ? BackendKind::sidecar : BackendKind::oracle;
  if (!f.endpoint.empty()) c.sidecar.endpoint = f.endpoint;
  if (f.timeout) c.sidecar.timeout_seconds = *f.timeout;
  if (!f.faults.empty()) c.faults = f.faults;
  if (f.workers) c.workers = *f.workers;
  if (f.alpha) c.params.alpha = *f.alpha;
  if (f.beta) c.params.beta = *f.beta;
  if (f.delta) c.params.delta = *f.delta;
  if (f.sigma) c.params.sigma = *f.sigma;
  if (!f.prompt_template.empty()) c.params.prompt_template = f.prompt_template;
  try {
    c.validate();
  } catch (const PreconditionError& e) {
    throw StartupError(e.what());
  }
  return c;
}

int exit_code(const PhaseSummary& s) { return s.failed > 0 ? 1 : 0; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Point-guided pseudo-label generation and evaluation for camouflaged object detection"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "only log warnings and errors");

  RunFlags segment_flags, choose_flags, all_flags;
  auto* segment = app.add_subcommand("segment", "generate point/text candidate masks");
  add_run_flags(segment, segment_flags);
  auto* choose = app.add_subcommand("choose", "select the final pseudo mask per sample");
  add_run_flags(choose, choose_flags);
  auto* all = app.add_subcommand("run-all", "segment, choose, and evaluate against manifest gt");
  add_run_flags(all, all_flags);

  std::string pred_dir, gt_dir, eval_out = "eval";
  auto* evaluate = app.add_subcommand("evaluate", "score predicted maps against ground truth");
  evaluate->add_option("--pred", pred_dir, "prediction PNG directory")->required();
  evaluate->add_option("--gt", gt_dir, "ground-truth PNG directory")->required();
  evaluate->add_option("--output", eval_out, "report directory");

  SynthOptions synth_options;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "emit a synthetic oracle dataset");
  synth->add_option("--out", synth_out, "dataset directory")->required();
  synth->add_option("--count", synth_options.count, "number of scenes");
  synth->add_option("--seed", synth_options.seed, "dataset seed");
  synth->add_option("--width", synth_options.width, "canvas width");
  synth->add_option("--height", synth_options.height, "canvas height");

  auto* params = app.add_subcommand("params", "print the default pipeline parameters as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Usage errors are configuration errors; --help still exits 0.
    return app.exit(e) == 0 ? 0 : 2;
  }
  if (quiet) spdlog::set_level(spdlog::level::warn);

  try {
    if (*segment) {
      const auto config = build_config(segment_flags);
      return exit_code(run_segment(config, make_backend_provider(config)));
    }
    if (*choose) {
      const auto config = build_config(choose_flags);
      return exit_code(run_choose(config, make_backend_provider(config)));
    }
    if (*all) {
      const auto summary = run_all(build_config(all_flags));
      return summary.segment.failed + summary.choose.failed > 0 ? 1 : 0;
    }
    if (*evaluate) {
      run_evaluate(pred_dir, gt_dir, eval_out);
      return 0;
    }
    if (*synth) {
      synth_options.out = synth_out;
      std::cout << write_synthetic_dataset(synth_options).string() << "\n";
      return 0;
    }
    if (*params) {
      std::cout << nlohmann::json(PipelineParams{}).dump(2) << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 2;
}
