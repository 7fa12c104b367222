#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "test_support.hpp"
#include "wscod/codec.hpp"
#include "wscod/oracle.hpp"
#include "wscod/pipeline.hpp"

using namespace wscod;
using nlohmann::json;
using wscod::testing::TempDir;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

std::vector<json> read_jsonl(const fs::path& p) {
  std::vector<json> out;
  std::istringstream in(slurp(p));
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.push_back(json::parse(line));
  }
  return out;
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = slurp(e.path());
  }
  return out;
}

RunConfig oracle_config(const fs::path& manifest, const fs::path& out, int workers = 1) {
  RunConfig c;
  c.manifest = manifest;
  c.output = out;
  c.workers = workers;
  return c;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(WSCOD_CLI_PATH) + " -q " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Manifest, WellFormedRecord) {
  TempDir dir("wscod_manifest");
  write_image(dir.path() / "img" / "a.png", ImageBuffer(4, 3));
  spit(dir.path() / "m.jsonl", "\n" R"({"image":"img/a.png","points":[[1,2]],"text":"frog"})" "\n\n");
  const auto samples = load_manifest(dir.path() / "m.jsonl");
  ASSERT_EQ(samples.size(), 1u);
  EXPECT_EQ(samples[0].stem, "a");
  EXPECT_EQ(samples[0].image_path, (dir.path() / "img/a.png").string());
  EXPECT_EQ(samples[0].points, (PointSet{{1, 2}}));
  EXPECT_EQ(samples[0].text.str(), "frog");
  EXPECT_TRUE(samples[0].gt_path.empty());
}

TEST(Manifest, MissingTextNamesLineAndField) {
  TempDir dir("wscod_manifest");
  write_image(dir.path() / "a.png", ImageBuffer(4, 3));
  write_image(dir.path() / "b.png", ImageBuffer(4, 3));
  spit(dir.path() / "m.jsonl", R"({"image":"a.png","points":[[1,2]],"text":"frog"})"
                               "\n" R"({"image":"b.png","points":[[1,2]]})" "\n");
  try {
    load_manifest(dir.path() / "m.jsonl");
    FAIL() << "expected throw";
  } catch (const ManifestError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("'text'"), std::string::npos);
  }
}

TEST(Manifest, OtherRecordErrors) {
  TempDir dir("wscod_manifest");
  write_image(dir.path() / "a.png", ImageBuffer(4, 3));
  const auto m = dir.path() / "m.jsonl";
  for (const std::string bad :
       {R"({"image":"a.png","points":[],"text":"frog"})", R"({"image":"a.png","points":[[1]],"text":"frog"})",
        R"({"image":"a.png","points":[[1,2]],"text":"   "})", R"({"image":"zz.png","points":[[1,2]],"text":"x"})",
        R"({"image":"a.png","points":[[1,2]],"text":"x","gt":"none.png"})", R"([1,2,3])", R"({"image":"a.png")"}) {
    spit(m, bad + "\n");
    EXPECT_THROW(load_manifest(m), ManifestError) << bad;
  }
  spit(m, R"({"image":"a.png","points":[[1,2]],"text":"x"})" "\n" R"({"image":"a.png","points":[[0,0]],"text":"y"})" "\n");
  EXPECT_THROW(load_manifest(m), ManifestError);
  EXPECT_THROW(load_manifest(dir.path() / "missing.jsonl"), StartupError);
}

TEST(Segment, OutOfBoundsPointFailsAtDecode) {
  TempDir dir("wscod_oob");
  const auto manifest = write_synthetic_dataset({dir.path() / "data", 2, 5});
  std::string text = slurp(manifest);
  const auto first_end = text.find('\n');
  json rec = json::parse(text.substr(0, first_end));
  rec["points"] = json::array({json::array({-1, 5})});
  text = rec.dump() + text.substr(first_end);
  spit(manifest, text);

  const auto samples = load_manifest(manifest);
  ASSERT_EQ(samples.size(), 2u);
  const RunConfig config = oracle_config(manifest, dir.path() / "out");
  const auto summary = run_segment(config, make_backend_provider(config));
  EXPECT_EQ(summary.failed, 1);
  EXPECT_EQ(summary.succeeded, 1);
  const auto skipped = read_jsonl(dir.path() / "out" / "segment_skipped.jsonl");
  ASSERT_EQ(skipped.size(), 1u);
  EXPECT_EQ(skipped[0]["stem"], "scene_0000");
  EXPECT_NE(skipped[0]["error"].get<std::string>().find("outside"), std::string::npos);
  // Each sample lands in exactly one of outputs and skip log.
  EXPECT_FALSE(fs::exists(candidate_path(config.output, "scene_0000", "point")));
  EXPECT_TRUE(fs::exists(candidate_path(config.output, "scene_0001", "point")));
}

TEST(Segment, TenScenesTwentyMasksAndDeterministic) {
  TempDir dir("wscod_segment");
  const auto manifest = write_synthetic_dataset({dir.path() / "data", 10, 42});
  const RunConfig config = oracle_config(manifest, dir.path() / "out");
  const auto summary = run_segment(config, make_backend_provider(config));
  EXPECT_EQ(summary.succeeded, 10);
  EXPECT_EQ(summary.failed, 0);
  int masks = 0;
  for (const auto& e : fs::directory_iterator(config.output / "candidates")) masks += e.path().extension() == ".png";
  EXPECT_EQ(masks, 20);
  const json log = json::parse(slurp(config.output / "logs" / "scene_0003.json"));
  EXPECT_TRUE(log.contains("detected_boxes"));
  EXPECT_FALSE(log["rectified_boxes"].empty());
  EXPECT_TRUE(log["erasure_triggered"].is_boolean());
  EXPECT_TRUE(read_jsonl(config.output / "segment_skipped.jsonl").empty());

  const auto first = tree(config.output);
  run_segment(config, make_backend_provider(config));
  EXPECT_EQ(tree(config.output), first);

  const RunConfig parallel = oracle_config(manifest, dir.path() / "out_parallel", 4);
  run_segment(parallel, make_backend_provider(parallel));
  EXPECT_EQ(tree(parallel.output), first);
}

TEST(Segment, CandidatesMatchSceneTruth) {
  TempDir dir("wscod_truth");
  const auto manifest = write_synthetic_dataset({dir.path() / "data", 5, 9});
  const RunConfig config = oracle_config(manifest, dir.path() / "out");
  run_segment(config, make_backend_provider(config));
  for (const auto& s : load_manifest(manifest)) {
    const BinaryMask gt = read_mask(s.gt_path);
    EXPECT_DOUBLE_EQ(mask_iou(read_mask(candidate_path(config.output, s.stem, "point")), gt), 1.0);
    EXPECT_DOUBLE_EQ(mask_iou(read_mask(candidate_path(config.output, s.stem, "text")), gt), 1.0);
  }
}

TEST(Segment, UnreachableSidecarIsStartupErrorWithoutOutputs) {
  TempDir dir("wscod_sidecar");
  const auto manifest = write_synthetic_dataset({dir.path() / "data", 1, 1});
  RunConfig config = oracle_config(manifest, dir.path() / "out");
  config.backend = BackendKind::sidecar;
  config.sidecar.endpoint = "http://127.0.0.1:1";
  config.sidecar.timeout_seconds = 2;
  EXPECT_THROW(make_backend_provider(config), StartupError);
  EXPECT_THROW(run_all(config), StartupError);
  EXPECT_FALSE(fs::exists(config.output));

  EXPECT_EQ(run_cli("segment --backend sidecar --timeout 2 --endpoint http://127.0.0.1:1 --manifest " +
                    manifest.string() + " --output " + (dir.path() / "cli_out").string()),
            2);
  EXPECT_FALSE(fs::exists(dir.path() / "cli_out"));
}

TEST(Segment, EnvVarOverridesConfigEndpoint) {
  TempDir dir("wscod_env");
  const auto manifest = write_synthetic_dataset({dir.path() / "data", 1, 1});
  spit(dir.path() / "cfg.json", json{{"manifest", manifest.string()}, {"output", "out"}, {"backend", "sidecar"},
                                     {"endpoint", "http://127.0.0.1:2"}, {"timeout", 2}}
                                    .dump());
  const std::string cmd = std::string(kSidecarEnv) + "=http://127.0.0.1:1 " + WSCOD_CLI_PATH +
                          " -q run-all --config " + (dir.path() / "cfg.json").string() + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  ASSERT_NE(pipe, nullptr);
  std::string output;
  char buf[512];
  while (fgets(buf, sizeof buf, pipe) != nullptr) output += buf;
  const int status = pclose(pipe);
  EXPECT_EQ(WEXITSTATUS(status), 2);
  EXPECT_NE(output.find("127.0.0.1:1"), std::string::npos) << output;
  EXPECT_FALSE(fs::exists(dir.path() / "out"));
}

TEST(Choose, OracleSelectsHigherIoUCandidate) {
  TempDir dir("wscod_choose");
  const auto manifest = write_synthetic_dataset({dir.path() / "data", 6, 13});
  RunConfig config = oracle_config(manifest, dir.path() / "out");
  config.faults = "drop-detections";
  const auto provider = make_backend_provider(config);
  run_segment(config, provider);
  // Degrade some text candidates so the choice is not trivial.
  const auto samples = load_manifest(manifest);
  for (std::size_t i = 0; i < samples.size(); i += 2) {
    BinaryMask m = read_mask(samples[i].gt_path);
    m.topRows(m.rows() / 2).setConstant(true);
    write_mask(candidate_path(config.output, samples[i].stem, "text"), m);
  }
  const auto summary = run_choose(config, provider);
  EXPECT_EQ(summary.succeeded, 6);
  const auto records = read_jsonl(config.output / "selections.jsonl");
  ASSERT_EQ(records.size(), 6u);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& r = records[i];
    const auto& s = samples[i];
    EXPECT_EQ(r["stem"], s.stem);
    EXPECT_EQ(r["prompt_used"], "A " + s.text.str());
    const BinaryMask gt = read_mask(s.gt_path);
    const double iou_point = mask_iou(read_mask(candidate_path(config.output, s.stem, "point")), gt);
    const double iou_text = mask_iou(read_mask(candidate_path(config.output, s.stem, "text")), gt);
    const std::string expected = iou_text > iou_point ? "text" : "point";
    EXPECT_EQ(r["chosen_path"], expected) << s.stem;
    EXPECT_DOUBLE_EQ(mask_iou(read_mask(final_mask_path(config.output, s.stem)), gt), std::max(iou_point, iou_text));
  }
}

TEST(Choose, SingleSampleOneRecordAndCorruptCandidate) {
  TempDir dir("wscod_corrupt");
  const auto manifest = write_synthetic_dataset({dir.path() / "data", 2, 3});
  const RunConfig config = oracle_config(manifest, dir.path() / "out");
  const auto provider = make_backend_provider(config);
  run_segment(config, provider);
  spit(candidate_path(config.output, "scene_0001", "text"), "not a png");
  const auto summary = run_choose(config, provider);
  EXPECT_EQ(summary.succeeded, 1);
  EXPECT_EQ(summary.failed, 1);
  EXPECT_EQ(read_jsonl(config.output / "selections.jsonl").size(), 1u);
  const auto skipped = read_jsonl(config.output / "choose_skipped.jsonl");
  ASSERT_EQ(skipped.size(), 1u);
  EXPECT_NE(skipped[0]["error"].get<std::string>().find("scene_0001_text.png"), std::string::npos);
  EXPECT_FALSE(fs::exists(final_mask_path(config.output, "scene_0001")));

  fs::remove(candidate_path(config.output, "scene_0000", "point"));
  EXPECT_EQ(run_choose(config, provider).failed, 2);
}

TEST(Evaluate, PredEqualsGt) {
  TempDir dir("wscod_eval");
  const auto manifest = write_synthetic_dataset({dir.path() / "data", 4, 21});
  const auto summary = run_evaluate(dir.path() / "data" / "gt", dir.path() / "data" / "gt", dir.path() / "eval");
  EXPECT_NEAR(summary.report.mean.s_measure, 1.0, 1e-9);
  EXPECT_DOUBLE_EQ(summary.report.mean.mae, 0.0);
  EXPECT_DOUBLE_EQ(*summary.report.mean.f_adaptive, 1.0);
  EXPECT_DOUBLE_EQ(*summary.report.mean.f_max, 1.0);
  EXPECT_NEAR(*summary.report.mean.f_weighted, 1.0, 1e-9);
  const json report = json::parse(slurp(dir.path() / "eval" / "report.json"));
  EXPECT_EQ(report["metric_order"],
            (json{"S_alpha", "MAE", "E_phi", "F_phi", "F_beta_max", "F_beta_w"}));
  EXPECT_EQ(report["images"], 4);
  EXPECT_EQ(slurp(dir.path() / "eval" / "report.csv"),
            "dataset,S_alpha,MAE,E_phi,F_phi,F_beta_max,F_beta_w\n"
            "mean,1.000000,0.000000,1.000000,1.000000,1.000000,1.000000\n");
  std::istringstream pr(slurp(dir.path() / "eval" / "pr_curve.csv"));
  int lines = 0;
  for (std::string l; std::getline(pr, l);) ++lines;
  EXPECT_EQ(lines, 257);
}

TEST(Evaluate, ToyTwoImageSet) {
  // a: exact 2x2 prediction. b: uniform 0.5 (level 128) against one foreground pixel.
  TempDir dir("wscod_toy");
  BinaryMask gt = BinaryMask::Constant(2, 2, false);
  gt(0, 0) = true;
  for (const char* stem : {"a", "b"}) write_mask(dir.path() / "gt" / (std::string(stem) + ".png"), gt);
  write_mask(dir.path() / "pred" / "a.png", gt);
  write_file(dir.path() / "pred" / "b.png", encode_gray_png(GrayMap::Constant(2, 2, 128.0 / 255.0)));
  const auto summary = run_evaluate(dir.path() / "pred", dir.path() / "gt", dir.path() / "eval");
  EXPECT_NEAR(summary.report.mean.mae, ((127.0 / 255.0 + 3 * 128.0 / 255.0) / 4) / 2, 1e-12);
  EXPECT_NEAR(*summary.report.mean.f_adaptive, 0.5, 1e-12);
  EXPECT_NEAR(*summary.report.mean.f_max, (1.0 + 0.325 / 1.075) / 2, 1e-12);
  EXPECT_NEAR(summary.report.mean.e_measure, (1.0 + 0.25) / 2, 1e-12);
  const std::string per_image = slurp(dir.path() / "eval" / "per_image.csv");
  EXPECT_EQ(per_image.substr(0, per_image.find('\n')), "image,S_alpha,MAE,E_phi,F_phi,F_beta_max,F_beta_w");
  EXPECT_NE(per_image.find("\na,1.000000,0.000000,1.000000,1.000000,1.000000,1.000000\n"), std::string::npos);
}

TEST(Evaluate, MissingGtExcludedAndReported) {
  TempDir dir("wscod_missing");
  const BinaryMask m = BinaryMask::Constant(4, 4, true);
  write_mask(dir.path() / "pred" / "a.png", m);
  write_mask(dir.path() / "pred" / "orphan.png", m);
  write_mask(dir.path() / "gt" / "a.png", m);
  write_mask(dir.path() / "gt" / "lonely.png", m);
  const auto summary = run_evaluate(dir.path() / "pred", dir.path() / "gt", dir.path() / "eval");
  EXPECT_EQ(summary.report.per_image.size(), 1u);
  EXPECT_EQ(summary.excluded, (std::vector<std::string>{"orphan"}));
  const json report = json::parse(slurp(dir.path() / "eval" / "report.json"));
  EXPECT_EQ(report["excluded"], json::array({"orphan"}));
  EXPECT_EQ(report["unmatched_gt"], json::array({"lonely"}));

  fs::remove(dir.path() / "gt" / "a.png");
  EXPECT_THROW(run_evaluate(dir.path() / "pred", dir.path() / "gt", dir.path() / "eval2"), StartupError);
  EXPECT_EQ(run_cli("evaluate --pred " + (dir.path() / "pred").string() + " --gt " + (dir.path() / "gt").string() +
                    " --output " + (dir.path() / "eval3").string()),
            2);
}

TEST(Evaluate, DimensionMismatchNamesPair) {
  TempDir dir("wscod_dims");
  write_mask(dir.path() / "pred" / "odd.png", BinaryMask::Constant(4, 5, true));
  write_mask(dir.path() / "gt" / "odd.png", BinaryMask::Constant(4, 4, true));
  try {
    run_evaluate(dir.path() / "pred", dir.path() / "gt", dir.path() / "eval");
    FAIL() << "expected throw";
  } catch (const DimensionMismatch& e) {
    EXPECT_NE(std::string(e.what()).find("odd"), std::string::npos);
  }
}

TEST(Config, LoadResolvesPathsAndParams) {
  TempDir dir("wscod_config");
  spit(dir.path() / "cfg" / "run.json",
       R"({"manifest":"data/m.jsonl","output":"/abs/out","backend":"sidecar","endpoint":"http://h:1",)"
       R"("timeout":3.5,"max_in_flight":2,"workers":3,"seed":9,"params":{"alpha":0.9,"prompt_template":"the {text}"}})");
  const RunConfig c = load_config(dir.path() / "cfg" / "run.json");
  EXPECT_EQ(c.manifest, dir.path() / "cfg" / "data/m.jsonl");
  EXPECT_EQ(c.output, fs::path("/abs/out"));
  EXPECT_EQ(c.backend, BackendKind::sidecar);
  EXPECT_EQ(c.sidecar.endpoint, "http://h:1");
  EXPECT_DOUBLE_EQ(c.sidecar.timeout_seconds, 3.5);
  EXPECT_EQ(c.sidecar.max_in_flight, 2);
  EXPECT_EQ(c.workers, 3);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_DOUBLE_EQ(c.params.alpha, 0.9);
  EXPECT_DOUBLE_EQ(c.params.beta, 0.20);
  EXPECT_EQ(c.params.prompt_template, "the {text}");
}

TEST(Config, Errors) {
  TempDir dir("wscod_config");
  spit(dir.path() / "a.json", R"({"backend":"gpu"})");
  EXPECT_THROW(load_config(dir.path() / "a.json"), StartupError);
  spit(dir.path() / "b.json", R"({"workers":"many"})");
  EXPECT_THROW(load_config(dir.path() / "b.json"), StartupError);
  spit(dir.path() / "c.json", "{");
  EXPECT_THROW(load_config(dir.path() / "c.json"), StartupError);
  EXPECT_THROW(load_config(dir.path() / "none.json"), StartupError);

  RunConfig c;
  c.manifest = "m.jsonl";
  c.workers = 0;
  EXPECT_THROW(c.validate(), StartupError);
  c.workers = 1;
  c.faults = "melt";
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.faults.clear();
  c.params.alpha = 0;
  EXPECT_THROW(c.validate(), PreconditionError);
}

TEST(Params, DefaultSnapshot) {
  const json expected = json::parse(
      R"({"alpha":0.95,"beta":0.2,"delta":0.8,"sigma":50.0,"prompt_template":"A {text}"})");
  EXPECT_EQ(json(PipelineParams{}), expected);
  EXPECT_EQ(json(RunConfig{}.params), expected);
  EXPECT_EQ(json(PipelineParams{}).get<PipelineParams>(), PipelineParams{});

  const std::string out_file = wscod::testing::TempDir("wscod_params").path().string() + ".json";
  ASSERT_EQ(std::system((std::string(WSCOD_CLI_PATH) + " params > " + out_file).c_str()), 0);
  EXPECT_EQ(json::parse(slurp(out_file)), expected);
  fs::remove(out_file);
}

TEST(Cli, RunAllWritesFullTree) {
  TempDir dir("wscod_cli");
  const auto data = dir.path() / "data";
  ASSERT_EQ(run_cli("synth --out " + data.string() + " --count 3 --seed 4"), 0);
  ASSERT_EQ(run_cli("run-all --manifest " + (data / "manifest.jsonl").string() + " --output " +
                    (dir.path() / "out").string() + " --workers 2 --faults full-image-box"),
            0);
  for (const char* f : {"masks/scene_0000.png", "masks/scene_0002.png", "selections.jsonl", "eval/report.json",
                        "eval/per_image.csv", "eval/pr_curve.csv", "logs/scene_0001.json",
                        "candidates/scene_0001_text.png"}) {
    EXPECT_TRUE(fs::exists(dir.path() / "out" / f)) << f;
  }
  const json report = json::parse(slurp(dir.path() / "out" / "eval" / "report.json"));
  EXPECT_DOUBLE_EQ(report["metrics"]["MAE"].get<double>(), 0.0);
  EXPECT_EQ(run_cli("segment --manifest " + (data / "manifest.jsonl").string() + " --alpha 1.5"), 2);
  EXPECT_EQ(run_cli("bogus"), 2);
}

TEST(ParallelFor, RunsEveryIndexOnceAndPropagatesFailure) {
  std::vector<std::atomic<int>> hits(100);
  parallel_for(hits.size(), 8, [&](std::size_t i) { ++hits[i]; });
  for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
  EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) { if (i == 7) throw std::runtime_error("x"); }),
               std::runtime_error);
}
