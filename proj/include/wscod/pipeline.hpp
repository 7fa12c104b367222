#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "wscod/backends.hpp"
#include "wscod/core.hpp"
#include "wscod/metrics.hpp"
#include "wscod/sidecar_client.hpp"

namespace wscod {

namespace fs = std::filesystem;

/// Manifest record failure; carries the 1-based line number.
class ManifestError : public std::runtime_error {
 public:
  ManifestError(std::size_t line, const std::string& message)
      : std::runtime_error("manifest line " + std::to_string(line) + ": " + message), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Bad configuration or unreachable backend: the run cannot start.
class StartupError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One JSON object per line: {image, points:[[x,y],...], text, gt?, scene?}.
/// Relative paths resolve against the manifest's directory.
std::vector<Sample> load_manifest(const fs::path& path);
Sample parse_manifest_record(const nlohmann::json& record, const fs::path& base_dir);

enum class BackendKind { oracle, sidecar };

struct RunConfig {
  fs::path manifest;
  fs::path output = "out";
  BackendKind backend = BackendKind::oracle;
  SidecarOptions sidecar;
  std::string faults;  // oracle fault plan, comma separated
  PipelineParams params;
  int workers = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

void to_json(nlohmann::json& j, const PipelineParams& params);
void from_json(const nlohmann::json& j, PipelineParams& params);

/// Reads a JSON config; relative paths resolve against the config's directory.
RunConfig load_config(const fs::path& path);
RunConfig config_from_json(const nlohmann::json& j, const fs::path& base_dir);

inline constexpr const char* kSidecarEnv = "WSCOD_SIDECAR_URL";

/// Hands out the model backends for one sample.
using BackendProvider = std::function<Backends(const Sample&)>;

/// Oracle backends read each sample's scene file; the sidecar client is shared and
/// health-checked here, so an unreachable sidecar fails before any output exists.
BackendProvider make_backend_provider(const RunConfig& config);

struct PhaseSummary {
  int succeeded = 0;
  int failed = 0;
};

/// Runs `task(i)` for i in [0, count) on `workers` threads.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& task);

// Output layout under RunConfig::output.
fs::path candidate_path(const fs::path& out, const std::string& stem, const char* which);
fs::path final_mask_path(const fs::path& out, const std::string& stem);

PhaseSummary run_segment(const RunConfig& config, const BackendProvider& backends);
PhaseSummary run_choose(const RunConfig& config, const BackendProvider& backends);

struct EvalInput {
  std::string stem;
  fs::path pred;
  fs::path gt;
};

struct EvaluateSummary {
  DatasetReport report;
  std::vector<std::string> excluded;  // predictions without ground truth
  std::vector<std::string> unmatched_gt;
};

EvaluateSummary evaluate_files(const std::vector<EvalInput>& inputs,
                               const std::vector<std::string>& excluded,
                               const std::vector<std::string>& unmatched_gt,
                               const fs::path& out_dir, const MetricOptions& options = {});

/// Pairs PNGs by file stem across the two directories.
EvaluateSummary run_evaluate(const fs::path& pred_dir, const fs::path& gt_dir,
                             const fs::path& out_dir, const MetricOptions& options = {});

struct RunAllSummary {
  PhaseSummary segment;
  PhaseSummary choose;
  bool evaluated = false;
};

/// segment + choose, then evaluation against every manifest gt that exists.
RunAllSummary run_all(const RunConfig& config);

struct SynthOptions {
  fs::path out;
  int count = 10;
  std::uint64_t seed = 0;
  int width = 128;
  int height = 128;
};

/// Writes images/, gt/, scenes/ and manifest.jsonl for a synthetic oracle dataset.
fs::path write_synthetic_dataset(const SynthOptions& options);

void write_report_files(const EvaluateSummary& summary, const fs::path& out_dir);

}  // namespace wscod
