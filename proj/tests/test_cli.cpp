#include <gtest/gtest.h>

#include <json.hpp>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

#include "tvcp/annotation.hpp"
#include "tvcp/dataset.hpp"
#include "tvcp/evaluation.hpp"
#include "tvcp/util.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace tvcp;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run tvcp_cli(const std::string& args) {
  const std::string cmd = std::string(TVCP_CLI_PATH) + " " + args + " 2>&1";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

json read_json(const fs::path& p) { return json::parse(read_file(p)); }

// Every manifest output hash must match the file on disk.
void expect_manifest(const fs::path& manifest, const std::string& command) {
  ASSERT_TRUE(fs::exists(manifest)) << manifest;
  const auto m = read_json(manifest);
  EXPECT_EQ(m["command"], command);
  EXPECT_TRUE(m.contains("started_at"));
  EXPECT_FALSE(m["outputs"].empty());
  for (const auto& o : m["outputs"]) {
    ASSERT_TRUE(fs::exists(o["path"].get<std::string>())) << o["path"];
    EXPECT_EQ(o["sha256"], sha256_file(o["path"].get<std::string>()));
  }
  for (const auto& i : m["inputs"]) EXPECT_EQ(i["sha256"], sha256_file(i["path"].get<std::string>()));
}

const std::string kSmall = "--hidden 16 --layers 1 --heads 2 --max-length 32 --batch-size 8 --lr 1e-3 --seed 5";

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / "tvcp_cli_test";
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  // synth + 5-fold split, shared by the training tests
  static void ensure_data() {
    if (fs::exists(dir_ / "plan.json")) return;
    auto r = tvcp_cli("synth --targets 40 --seed 9 --out " + q(dir_ / "data.jsonl"));
    ASSERT_EQ(r.code, 0) << r.out;
    r = tvcp_cli("split --data " + q(dir_ / "data.jsonl") + " --folds 5 --seed 1 --out " + q(dir_ / "plan.json"));
    ASSERT_EQ(r.code, 0) << r.out;
  }
  static inline fs::path dir_;
};

}  // namespace

TEST_F(Cli, SynthAndSplit) {
  const auto data = dir_ / "synth.jsonl";
  auto r = tvcp_cli("synth --targets 12 --seed 3 --out " + q(data));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("wrote 36 samples"), std::string::npos);
  EXPECT_EQ(load_and_validate(data, ValidationMode::kStrict).samples.size(), 36u);
  expect_manifest(data.string() + ".run.json", "synth");
  const auto first = read_file(data);
  ASSERT_EQ(tvcp_cli("synth --targets 12 --seed 3 --out " + q(data)).code, 0);
  EXPECT_EQ(read_file(data), first);

  r = tvcp_cli("split --data " + q(data) + " --folds 3 --seed 2 --out " + q(dir_ / "p3.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(load_split_plan(dir_ / "p3.json").folds.size(), 3u);
  expect_manifest(dir_ / "p3.json.run.json", "split");

  r = tvcp_cli("split --data " + q(data) + " --holdout 0.8,0.1 --out " + q(dir_ / "ph.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(load_split_plan(dir_ / "ph.json").folds.size(), 1u);
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(tvcp_cli("--help").code, 0);
  EXPECT_EQ(tvcp_cli("").code, 2);                        // no subcommand
  EXPECT_EQ(tvcp_cli("synth").code, 2);                   // missing --out
  EXPECT_EQ(tvcp_cli("frobnicate").code, 2);
  EXPECT_EQ(tvcp_cli("synth --targets -3 --out x").code, 2);

  // malformed dataset: a validation error, exit 1
  const auto bad = dir_ / "bad.jsonl";
  std::ofstream(bad) << "{not json\n";
  const auto r = tvcp_cli("split --data " + q(bad) + " --out " + q(dir_ / "never.json"));
  EXPECT_EQ(r.code, 1) << r.out;
  EXPECT_NE(r.out.find("line 1"), std::string::npos) << r.out;
  EXPECT_FALSE(fs::exists(dir_ / "never.json"));

  ensure_data();
  const auto base = "train --data " + q(dir_ / "data.jsonl") + " --plan " + q(dir_ / "plan.json") + " --out " +
                    q(dir_ / "never_run");
  EXPECT_EQ(tvcp_cli(base + " --preset no-such-model").code, 2);
  EXPECT_EQ(tvcp_cli(base + " --fold 9").code, 2);
  EXPECT_EQ(tvcp_cli(base + " --fold abc").code, 2);
  EXPECT_EQ(tvcp_cli(base + " --heads 3 --hidden 16").code, 2);  // hidden not divisible by heads
}

TEST_F(Cli, TrainEvalBootstrap) {
  ensure_data();
  const auto run = dir_ / "run0";
  auto r = tvcp_cli("train --data " + q(dir_ / "data.jsonl") + " --plan " + q(dir_ / "plan.json") +
                    " --fold 0 --epochs 2 " + kSmall + " --out " + q(run));
  ASSERT_EQ(r.code, 0) << r.out;
  for (const char* f : {"best.ckpt", "metrics.csv", "test_predictions.jsonl", "metrics.json", "per_delta.csv"})
    EXPECT_TRUE(fs::exists(run / f)) << f;
  expect_manifest(run / "run_manifest.json", "train");
  EXPECT_EQ(read_json(run / "run_manifest.json")["seed"], 5);

  // eval of the checkpoint on the same test subset reproduces the training-time report
  const auto ev = dir_ / "eval0";
  r = tvcp_cli("eval --checkpoint " + q(run / "best.ckpt") + " --data " + q(dir_ / "data.jsonl") + " --plan " +
               q(dir_ / "plan.json") + " --fold 0 --subset test --out " + q(ev));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(read_file(ev / "metrics.json"), read_file(run / "metrics.json"));
  EXPECT_EQ(read_file(ev / "per_delta.csv"), read_file(run / "per_delta.csv"));
  EXPECT_EQ(load_predictions(ev / "predictions.jsonl").size(), load_predictions(run / "test_predictions.jsonl").size());
  expect_manifest(ev / "run_manifest.json", "eval");

  r = tvcp_cli("eval --checkpoint " + q(dir_ / "missing.ckpt") + " --data " + q(dir_ / "data.jsonl") + " --out " +
               q(dir_ / "eval_missing"));
  EXPECT_EQ(r.code, 1) << r.out;

  // identical predictions: B never beats A
  const auto bj = dir_ / "boot.json";
  r = tvcp_cli("bootstrap --a " + q(run / "test_predictions.jsonl") + " --b " + q(ev / "predictions.jsonl") +
               " --metric em --resamples 200 --seed 4 --out " + q(bj));
  ASSERT_EQ(r.code, 0) << r.out;
  const auto b = read_json(bj);
  EXPECT_EQ(b["p_value"], 1.0);
  EXPECT_EQ(b["observed_difference"], 0.0);
  EXPECT_EQ(b["resamples"], 200);
  expect_manifest(bj.string() + ".run.json", "bootstrap");

  r = tvcp_cli("bootstrap --a " + q(run / "test_predictions.jsonl") + " --b " + q(ev / "predictions.jsonl") +
               " --metric f1");
  EXPECT_EQ(r.code, 2) << r.out;
}

TEST_F(Cli, CrossValidateAllFolds) {
  ensure_data();
  const auto run = dir_ / "cv";
  const auto r = tvcp_cli("train --data " + q(dir_ / "data.jsonl") + " --plan " + q(dir_ / "plan.json") +
                          " --fold all --epochs 1 " + kSmall + " --out " + q(run));
  ASSERT_EQ(r.code, 0) << r.out;
  const auto summary = read_json(run / "cv_summary.json");
  ASSERT_EQ(summary["folds"].size(), 5u);
  for (int k = 0; k < 5; ++k) EXPECT_TRUE(fs::exists(run / ("fold_" + std::to_string(k)) / "best.ckpt"));
  // every sample is tested exactly once across the folds
  EXPECT_EQ(load_predictions(run / "test_predictions.jsonl").size(), 120u);
  expect_manifest(run / "run_manifest.json", "train");
}

TEST_F(Cli, FractionCurveAndSweep) {
  ensure_data();
  auto r = tvcp_cli("fraction-curve --data " + q(dir_ / "data.jsonl") + " --plan " + q(dir_ / "plan.json") +
                    " --fold 0 --fractions 0.5,1.0 --subsample-seed 2 --epochs 1 " + kSmall + " --out " +
                    q(dir_ / "curve"));
  ASSERT_EQ(r.code, 0) << r.out;
  const auto csv = read_file(dir_ / "curve" / "fraction_curve.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  expect_manifest(dir_ / "curve" / "run_manifest.json", "fraction-curve");

  r = tvcp_cli("fraction-curve --data " + q(dir_ / "data.jsonl") + " --plan " + q(dir_ / "plan.json") +
               " --fractions 1.0,0.5 --out " + q(dir_ / "curve_bad"));
  EXPECT_NE(r.code, 0);

  r = tvcp_cli("sweep --data " + q(dir_ / "data.jsonl") +
               " --lrs 1e-3,1e-4 --dropouts 0.1 --freeze unfrozen --split-seed 3 --epochs 1 " + kSmall + " --out " +
               q(dir_ / "sweep"));
  ASSERT_EQ(r.code, 0) << r.out;
  const auto s = read_file(dir_ / "sweep" / "sweep.csv");
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 3);
  expect_manifest(dir_ / "sweep" / "run_manifest.json", "sweep");
}

TEST_F(Cli, Prepare) {
  const auto in = dir_ / "statements.jsonl";
  std::ofstream(in) << R"({"id":"a","text":"RT @someone: heading out"})" << "\n"
                    << R"({"id":"b","text":"I am driving home from work"})" << "\n"
                    << "plain line statement about going to the beach\n";
  std::ofstream(dir_ / "chain.json") << R"({"stages":["self_contained","length"],"min_words":3,"k":1})";
  const auto out = dir_ / "prep";
  const auto r = tvcp_cli("prepare --input " + q(in) + " --config " + q(dir_ / "chain.json") + " --out " + q(out));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("statements 3, passed 2"), std::string::npos) << r.out;
  const auto sel = read_file(out / "selected.txt");
  EXPECT_EQ(std::count(sel.begin(), sel.end(), '\n'), 1);
  expect_manifest(out / "run_manifest.json", "prepare");
}

TEST_F(Cli, ExportFromEventLog) {
  using namespace tvcp::annotation;
  const auto log = dir_ / "events.jsonl";
  {
    AnnotationService svc(log);
    svc.add_statement("st0", "heading to the beach with friends");
    const auto h = svc.create_hit_batches({"st0"}, HitKind::kDuration).front();
    svc.submit_duration_votes(h.hit_id, "a", {{"st0", Vote::of(DurationClass::k2To6h)}});
    svc.submit_duration_votes(h.hit_id, "b", {{"st0", Vote::of(DurationClass::k2To6h)}});
    const auto f = svc.create_hit_batches({"st0"}, HitKind::kFollowup).front();
    const auto s = svc.submit_followups(f.hit_id, "w",
                                        {{TvcpLabel::kDec, "the trip got cut short", DurationClass::k15To45Min},
                                         {TvcpLabel::kUnc, "I love sunny days", DurationClass::k2To6h},
                                         {TvcpLabel::kInc, "we stayed overnight", DurationClass::k1To3Days}});
    svc.review_submission("rev", s, Decision::kApprove, "");
  }
  const auto out = dir_ / "export";
  const auto r = tvcp_cli("export --log " + q(log) + " --out " + q(out));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(load_and_validate(out / "dataset.jsonl", ValidationMode::kStrict).samples.size(), 3u);
  expect_manifest(out / "run_manifest.json", "export");
}
