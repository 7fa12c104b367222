#include "wscod/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "wscod/codec.hpp"
#include "wscod/oracle.hpp"
#include "wscod/pcg.hpp"
#include "wscod/qcd.hpp"

namespace wscod {

using nlohmann::json;

namespace {

fs::path resolve(const fs::path& base, const fs::path& p) {
  return p.is_absolute() || base.empty() ? p : base / p;
}

json box_json(const BBox& b) {
  return {{"x_min", b.x_min}, {"y_min", b.y_min}, {"x_max", b.x_max}, {"y_max", b.y_max}};
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void write_skip_log(const fs::path& path, const std::vector<Sample>& samples,
                    const std::vector<std::optional<std::string>>& errors) {
  std::string text;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (errors[i]) text += json{{"stem", samples[i].stem}, {"error", *errors[i]}}.dump() + "\n";
  }
  write_text(path, text);
}

PhaseSummary summarize(const std::vector<std::optional<std::string>>& errors) {
  PhaseSummary s;
  for (const auto& e : errors) (e ? s.failed : s.succeeded)++;
  return s;
}

}  // namespace

Sample parse_manifest_record(const json& record, const fs::path& base_dir) {
  if (!record.is_object()) throw std::invalid_argument("record is not a JSON object");
  auto string_field = [&](const char* name) -> std::string {
    if (!record.contains(name)) throw std::invalid_argument(std::string("missing field '") + name + "'");
    if (!record[name].is_string()) {
      throw std::invalid_argument(std::string("field '") + name + "' must be a string");
    }
    return record[name].get<std::string>();
  };

  Sample s;
  s.image_path = resolve(base_dir, string_field("image")).string();
  try {
    s.text = TextTag(string_field("text"));
  } catch (const PreconditionError&) {
    throw std::invalid_argument("field 'text' must be non-empty");
  }
  if (!record.contains("points")) throw std::invalid_argument("missing field 'points'");
  const auto& pts = record["points"];
  if (!pts.is_array() || pts.empty()) {
    throw std::invalid_argument("field 'points' must be a non-empty array of [x, y]");
  }
  for (const auto& p : pts) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number_integer() || !p[1].is_number_integer()) {
      throw std::invalid_argument("field 'points' entries must be [x, y] integer pairs");
    }
    s.points.push_back({p[0].get<int>(), p[1].get<int>()});
  }
  if (record.contains("gt") && !record["gt"].is_null()) {
    s.gt_path = resolve(base_dir, string_field("gt")).string();
  }
  if (record.contains("scene") && !record["scene"].is_null()) {
    s.scene_path = resolve(base_dir, string_field("scene")).string();
  }
  s.stem = fs::path(s.image_path).stem().string();
  return s;
}

std::vector<Sample> load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw StartupError("cannot open manifest " + path.string());
  const fs::path base = path.parent_path();
  std::vector<Sample> samples;
  std::set<std::string> stems;
  std::string line;
  for (std::size_t number = 1; std::getline(in, line); ++number) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Sample s;
    try {
      s = parse_manifest_record(json::parse(line), base);
    } catch (const std::exception& e) {
      throw ManifestError(number, e.what());
    }
    for (const auto& [field, file] : {std::pair{"image", s.image_path}, std::pair{"gt", s.gt_path},
                                      std::pair{"scene", s.scene_path}}) {
      if (!file.empty() && !fs::exists(file)) {
        throw ManifestError(number, std::string("field '") + field + "': no such file " + file);
      }
    }
    if (!stems.insert(s.stem).second) throw ManifestError(number, "duplicate image stem '" + s.stem + "'");
    samples.push_back(std::move(s));
  }
  return samples;
}

void RunConfig::validate() const {
  params.validate();
  if (workers < 1) throw StartupError("workers must be >= 1");
  if (manifest.empty()) throw StartupError("no manifest given");
  if (output.empty()) throw StartupError("no output directory given");
  if (backend == BackendKind::oracle) parse_fault_plan(faults);
}

void to_json(json& j, const PipelineParams& p) {
  j = {{"alpha", p.alpha},
       {"beta", p.beta},
       {"delta", p.delta},
       {"sigma", p.sigma},
       {"prompt_template", p.prompt_template}};
}

void from_json(const json& j, PipelineParams& p) {
  PipelineParams d;
  p.alpha = j.value("alpha", d.alpha);
  p.beta = j.value("beta", d.beta);
  p.delta = j.value("delta", d.delta);
  p.sigma = j.value("sigma", d.sigma);
  p.prompt_template = j.value("prompt_template", d.prompt_template);
}

RunConfig config_from_json(const json& j, const fs::path& base_dir) {
  RunConfig c;
  try {
    if (j.contains("manifest")) c.manifest = resolve(base_dir, j["manifest"].get<std::string>());
    if (j.contains("output")) c.output = resolve(base_dir, j["output"].get<std::string>());
    const auto backend = j.value("backend", std::string("oracle"));
    if (backend == "oracle") {
      c.backend = BackendKind::oracle;
    } else if (backend == "sidecar") {
      c.backend = BackendKind::sidecar;
    } else {
      throw StartupError("unknown backend '" + backend + "'");
    }
    c.sidecar.endpoint = j.value("endpoint", c.sidecar.endpoint);
    c.sidecar.timeout_seconds = j.value("timeout", c.sidecar.timeout_seconds);
    c.sidecar.max_in_flight = j.value("max_in_flight", c.sidecar.max_in_flight);
    c.faults = j.value("faults", std::string());
    if (j.contains("params")) c.params = j["params"].get<PipelineParams>();
    c.workers = j.value("workers", 1);
    c.seed = j.value("seed", std::uint64_t{0});
  } catch (const json::exception& e) {
    throw StartupError(std::string("config: ") + e.what());
  }
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw StartupError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw StartupError("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

BackendProvider make_backend_provider(const RunConfig& config) {
  if (config.backend == BackendKind::sidecar) {
    Backends shared;
    try {
      shared = sidecar_backends(config.sidecar);
    } catch (const std::exception& e) {
      throw StartupError(std::string("sidecar unavailable: ") + e.what());
    }
    return [shared](const Sample&) { return shared; };
  }
  const FaultPlan faults = parse_fault_plan(config.faults);
  const double sigma = config.params.sigma;
  return [faults, sigma](const Sample& s) {
    if (s.scene_path.empty()) {
      throw std::runtime_error("oracle backend needs a scene file for sample " + s.stem);
    }
    std::ifstream in(s.scene_path);
    if (!in) throw std::runtime_error("cannot open scene " + s.scene_path);
    return oracle_backends(json::parse(in).get<SyntheticScene>(), faults, sigma);
  };
}

void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& task) {
  const auto threads = static_cast<std::size_t>(std::max(1, workers));
  if (threads == 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < std::min(threads, count); ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            task(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

fs::path candidate_path(const fs::path& out, const std::string& stem, const char* which) {
  return out / "candidates" / (stem + "_" + which + ".png");
}

fs::path final_mask_path(const fs::path& out, const std::string& stem) {
  return out / "masks" / (stem + ".png");
}

PhaseSummary run_segment(const RunConfig& config, const BackendProvider& backends) {
  config.validate();
  const auto samples = load_manifest(config.manifest);
  fs::create_directories(config.output / "candidates");
  fs::create_directories(config.output / "logs");

  std::vector<std::optional<std::string>> errors(samples.size());
  parallel_for(samples.size(), config.workers, [&](std::size_t i) {
    const Sample& s = samples[i];
    try {
      const ImageBuffer image = read_image(s.image_path);
      require_points_in_image(s.points, image.width(), image.height());
      TextPathTrace trace;
      const auto pair = generate_candidates(image, s.points, s.text, backends(s), config.params, &trace);
      write_mask(candidate_path(config.output, s.stem, "point"), pair.point_mask);
      write_mask(candidate_path(config.output, s.stem, "text"), pair.text_mask);

      json detected = json::array();
      for (const auto& d : trace.detected) {
        auto jb = box_json(d.box);
        jb["confidence"] = d.confidence;
        detected.push_back(jb);
      }
      json rectified = json::array();
      for (const auto& b : trace.rectified) rectified.push_back(box_json(b));
      json erasure_boxes = json::array();
      for (const auto& b : trace.erasure_boxes) erasure_boxes.push_back(box_json(b));
      const json log = {{"stem", s.stem},
                        {"detected_boxes", detected},
                        {"rectified_boxes", rectified},
                        {"raw_text_mask_fraction", trace.raw_mask_fraction},
                        {"erasure_triggered", trace.erasure_triggered},
                        {"erasure_boxes", erasure_boxes},
                        {"point_mask_fraction", mask_area_fraction(pair.point_mask)},
                        {"text_mask_fraction", mask_area_fraction(pair.text_mask)}};
      write_text(config.output / "logs" / (s.stem + ".json"), log.dump(2) + "\n");
      spdlog::info("segment {}: {} detections -> {} boxes{}", s.stem, trace.detected.size(),
                   trace.rectified.size(), trace.erasure_triggered ? ", mask erased" : "");
    } catch (const std::exception& e) {
      errors[i] = e.what();
      spdlog::warn("segment {} failed: {}", s.stem, e.what());
    }
  });
  write_skip_log(config.output / "segment_skipped.jsonl", samples, errors);
  return summarize(errors);
}

PhaseSummary run_choose(const RunConfig& config, const BackendProvider& backends) {
  config.validate();
  const auto samples = load_manifest(config.manifest);
  fs::create_directories(config.output / "masks");

  std::vector<std::optional<std::string>> errors(samples.size());
  std::vector<json> records(samples.size());
  parallel_for(samples.size(), config.workers, [&](std::size_t i) {
    const Sample& s = samples[i];
    try {
      CandidatePair pair;
      for (const auto* which : {"point", "text"}) {
        const auto path = candidate_path(config.output, s.stem, which);
        if (!fs::exists(path)) throw std::runtime_error("missing candidate " + path.filename().string());
      }
      pair.point_mask = read_mask(candidate_path(config.output, s.stem, "point"));
      pair.text_mask = read_mask(candidate_path(config.output, s.stem, "text"));
      const ImageBuffer image = read_image(s.image_path);
      const auto selection = choose_mask(image, pair, s.text, *backends(s).scorer, config.params);
      write_mask(final_mask_path(config.output, s.stem), selection.mask);

      const auto& r = selection.record;
      records[i] = {{"stem", s.stem},
                    {"chosen_path", to_string(r.chosen_path)},
                    {"score_point", r.score_point},
                    {"score_text", r.score_text},
                    {"prompt_used", r.prompt_used}};
      if (r.both_empty) {
        records[i]["warning"] = "both candidates empty";
        spdlog::warn("choose {}: both candidate masks are empty", s.stem);
      }
      spdlog::info("choose {}: {} ({:.4f} vs {:.4f})", s.stem, to_string(r.chosen_path),
                   r.score_point, r.score_text);
    } catch (const std::exception& e) {
      errors[i] = e.what();
      spdlog::warn("choose {} failed: {}", s.stem, e.what());
    }
  });

  std::string lines;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!errors[i]) lines += records[i].dump() + "\n";
  }
  write_text(config.output / "selections.jsonl", lines);
  write_skip_log(config.output / "choose_skipped.jsonl", samples, errors);
  return summarize(errors);
}

namespace {

const std::vector<std::string>& metric_columns() {
  static const std::vector<std::string> cols = {"S_alpha", "MAE",        "E_phi",
                                                "F_phi",   "F_beta_max", "F_beta_w"};
  return cols;
}

std::vector<std::optional<double>> metric_values(const MetricReport& r) {
  return {r.s_measure, r.mae, r.e_measure, r.f_adaptive, r.f_max, r.f_weighted};
}

std::string csv_row(const std::string& name, const MetricReport& r) {
  std::string row = name;
  for (const auto& v : metric_values(r)) row += v ? fmt::format(",{:.6f}", *v) : ",";
  return row + "\n";
}

std::string csv_header(const char* first) {
  std::string h = first;
  for (const auto& c : metric_columns()) h += "," + c;
  return h + "\n";
}

std::map<std::string, fs::path> pngs_by_stem(const fs::path& dir) {
  std::map<std::string, fs::path> out;
  if (!fs::is_directory(dir)) throw StartupError("not a directory: " + dir.string());
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") {
      out[entry.path().stem().string()] = entry.path();
    }
  }
  return out;
}

}  // namespace

void write_report_files(const EvaluateSummary& summary, const fs::path& out_dir) {
  const auto& report = summary.report;
  std::string per_image = csv_header("image");
  for (std::size_t i = 0; i < report.per_image.size(); ++i) {
    per_image += csv_row(report.names[i], report.per_image[i]);
  }
  write_text(out_dir / "per_image.csv", per_image);
  write_text(out_dir / "report.csv", csv_header("dataset") + csv_row("mean", report.mean));

  json metrics = json::object();
  const auto values = metric_values(report.mean);
  for (std::size_t k = 0; k < values.size(); ++k) {
    metrics[metric_columns()[k]] = values[k] ? json(*values[k]) : json(nullptr);
  }
  const json doc = {{"images", report.per_image.size()},
                    {"metric_order", metric_columns()},
                    {"metrics", metrics},
                    {"f_skipped", report.f_skipped},
                    {"excluded", summary.excluded},
                    {"unmatched_gt", summary.unmatched_gt}};
  write_text(out_dir / "report.json", doc.dump(2) + "\n");

  std::string pr = "threshold,precision,recall\n";
  for (int t = 0; t < kThresholds; ++t) {
    pr += fmt::format("{},{:.6f},{:.6f}\n", t, report.curve.precision[t], report.curve.recall[t]);
  }
  write_text(out_dir / "pr_curve.csv", pr);
}

EvaluateSummary evaluate_files(const std::vector<EvalInput>& inputs,
                               const std::vector<std::string>& excluded,
                               const std::vector<std::string>& unmatched_gt,
                               const fs::path& out_dir, const MetricOptions& options) {
  if (inputs.empty()) throw StartupError("no prediction/ground-truth pairs to evaluate");
  std::vector<EvalPair> pairs;
  for (const auto& in : inputs) pairs.push_back({in.stem, read_gray(in.pred), read_mask(in.gt)});
  EvaluateSummary summary;
  summary.report = evaluate_dataset(pairs, options);
  summary.excluded = excluded;
  summary.unmatched_gt = unmatched_gt;
  write_report_files(summary, out_dir);
  return summary;
}

EvaluateSummary run_evaluate(const fs::path& pred_dir, const fs::path& gt_dir,
                             const fs::path& out_dir, const MetricOptions& options) {
  const auto preds = pngs_by_stem(pred_dir);
  const auto gts = pngs_by_stem(gt_dir);
  std::vector<EvalInput> inputs;
  std::vector<std::string> excluded;
  std::vector<std::string> unmatched;
  for (const auto& [stem, path] : preds) {
    const auto it = gts.find(stem);
    if (it == gts.end()) {
      excluded.push_back(stem);
      spdlog::warn("evaluate: no ground truth for '{}', excluded", stem);
    } else {
      inputs.push_back({stem, path, it->second});
    }
  }
  for (const auto& [stem, path] : gts) {
    if (!preds.count(stem)) unmatched.push_back(stem);
  }
  if (!unmatched.empty()) spdlog::warn("evaluate: {} ground-truth files have no prediction", unmatched.size());
  return evaluate_files(inputs, excluded, unmatched, out_dir, options);
}

RunAllSummary run_all(const RunConfig& config) {
  config.validate();
  const auto backends = make_backend_provider(config);
  RunAllSummary summary;
  summary.segment = run_segment(config, backends);
  summary.choose = run_choose(config, backends);

  std::vector<EvalInput> inputs;
  std::vector<std::string> excluded;
  for (const auto& s : load_manifest(config.manifest)) {
    const auto pred = final_mask_path(config.output, s.stem);
    if (!fs::exists(pred)) continue;
    if (s.gt_path.empty()) {
      excluded.push_back(s.stem);
    } else {
      inputs.push_back({s.stem, pred, s.gt_path});
    }
  }
  if (!inputs.empty()) {
    evaluate_files(inputs, excluded, {}, config.output / "eval");
    summary.evaluated = true;
  }
  return summary;
}

fs::path write_synthetic_dataset(const SynthOptions& options) {
  if (options.count < 1) throw StartupError("synth: count must be >= 1");
  SceneOptions scene_options;
  scene_options.width = options.width;
  scene_options.height = options.height;
  std::string manifest;
  for (int i = 0; i < options.count; ++i) {
    const std::string stem = fmt::format("scene_{:04d}", i);
    const auto sample = generate_scene(options.seed * 1000003ULL + static_cast<std::uint64_t>(i),
                                       scene_options);
    write_image(options.out / "images" / (stem + ".png"), sample.scene.render());
    write_mask(options.out / "gt" / (stem + ".png"), sample.scene.camouflaged_mask());
    write_text(options.out / "scenes" / (stem + ".json"), json(sample.scene).dump(2) + "\n");
    json points = json::array();
    for (const auto& p : sample.points) points.push_back({p.x, p.y});
    manifest += json{{"image", "images/" + stem + ".png"},
                     {"points", points},
                     {"text", sample.tag},
                     {"gt", "gt/" + stem + ".png"},
                     {"scene", "scenes/" + stem + ".json"}}
                    .dump() +
                "\n";
  }
  const auto path = options.out / "manifest.jsonl";
  write_text(path, manifest);
  return path;
}

}  // namespace wscod
