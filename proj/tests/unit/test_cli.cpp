/*
 * Copyright 2026 The fairfuse Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "fame/commands.hpp"
#include "fame/config.hpp"
#include "fame/errors.hpp"
#include "json.hpp"

using namespace fame;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() /
           ("fairfuse_test_" + std::to_string(::getpid()) + "_" + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult run(std::vector<std::string> args) {
  args.insert(args.begin(), "fame");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Small, fast model settings shared by the command tests.
const std::vector<std::string> kFast = {"--shared-width", "4", "--hidden-width", "8",
                                        "--lr",           "1e-3", "--max-epochs", "2"};

std::vector<std::string> with_fast(std::vector<std::string> args) {
  args.insert(args.end(), kFast.begin(), kFast.end());
  return args;
}

std::string make_cohort(const TempDir& dir, std::size_t n = 300) {
  const std::string path = dir / "cohort.jsonl";
  const auto r = run({"generate", "--n", std::to_string(n), "--seed", "4", "--widths", "4,8,8",
                      "--bias", "demographic:ethnicity:Black:3.0", "-o", path});
  REQUIRE(r.code == 0);
  return path;
}

std::size_t line_count(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

}  // namespace

TEST_CASE("config files parse with comments and reject unknown keys") {
  std::istringstream good("# comment\nlambda = 0.4\n\n  gamma=1.0  # trailing\nmode = average\n");
  const auto cfg = KeyValueConfig::parse(good, "good.conf");
  CHECK(cfg.get_double("lambda", 0) == 0.4);
  CHECK(cfg.get_double("gamma", 0) == 1.0);
  CHECK(train_config(cfg).mode == FusionMode::kAverage);
  CHECK(cfg.get_double("clip", 0.05) == 0.05);

  std::istringstream unknown("lambda = 0.4\nlamda = 0.2\n");
  try {
    KeyValueConfig::parse(unknown, "bad.conf");
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("bad.conf:2") != std::string::npos);
  }
  std::istringstream no_equals("lambda 0.4\n");
  CHECK_THROWS_AS(KeyValueConfig::parse(no_equals), ConfigError);

  KeyValueConfig base = cfg;
  KeyValueConfig over;
  over.set("lambda", "0.9");
  base.merge(over);
  CHECK(base.get_double("lambda", 0) == 0.9);
  CHECK_THROWS_AS(over.set("nonsense", "1"), ConfigError);
  KeyValueConfig bad_number;
  bad_number.set("lambda", "abc");
  CHECK_THROWS_AS(train_config(bad_number), ConfigError);
}

TEST_CASE("bias specs parse") {
  const auto b = parse_biases("demographic:ethnicity:Black:3.0;notes:age_bucket:70+:1.5");
  REQUIRE(b.size() == 2);
  CHECK(b[0].modality == "demographic");
  CHECK(b[0].attribute == Attribute::kEthnicity);
  CHECK(b[0].noise_strength == 3.0);
  CHECK(b[1].attribute == Attribute::kAgeBucket);
  CHECK_THROWS_AS(parse_biases("demographic:ethnicity:Martian:3.0"), ConfigError);
  CHECK_THROWS_AS(parse_biases("demographic:ethnicity"), ConfigError);
}

TEST_CASE("generate honours overrides and validates marginals") {
  TempDir dir;
  const auto r = run({"generate", "--n", "1000", "-o", dir / "c.jsonl"});
  CHECK(r.code == 0);
  CHECK(load_cohort(dir / "c.jsonl").size() == 1000);

  const auto bad = run({"generate", "--n", "100", "--marginals-ethnicity", "0.5,0.5,0.5,0,0", "-o",
                        dir / "bad.jsonl"});
  CHECK(bad.code == 2);
  CHECK(bad.err.find("config error") != std::string::npos);
  CHECK(run({"generate", "--n", "100", "--no-such-key", "1", "-o", dir / "x.jsonl"}).code == 2);
}

TEST_CASE("train writes every output and audit reproduces the test report") {
  TempDir dir;
  const auto cohort = make_cohort(dir);
  const std::string out = dir / "run";
  const auto r = run(with_fast({"train", "--cohort", cohort, "-o", out, "--mode", "fame"}));
  REQUIRE(r.code == 0);
  for (const char* f : {"checkpoint.json", "trajectory.csv", "metrics.json", "predictions.csv",
                        "manifest.json"}) {
    CHECK(fs::exists(fs::path(out) / f));
  }
  const auto manifest = nlohmann::json::parse(slurp(out + "/manifest.json"));
  CHECK(manifest["cohort"]["sha256"].get<std::string>().size() == 64);
  CHECK(manifest["outputs"].size() >= 4);
  CHECK(manifest["config"]["mode"] == "fame");

  const auto audit = run({"audit", "--predictions", out + "/predictions.csv"});
  REQUIRE(audit.code == 0);
  CHECK(audit.out == slurp(out + "/metrics.json"));
  CHECK(r.out == audit.out);

  const auto eval = run({"evaluate", "--checkpoint", out + "/checkpoint.json", "--cohort", cohort});
  REQUIRE(eval.code == 0);
  CHECK(eval.out == audit.out);
}

TEST_CASE("train reports a missing cohort") {
  TempDir dir;
  const auto r = run({"train", "--cohort", dir / "absent.jsonl", "-o", dir / "run"});
  CHECK(r.code != 0);
  CHECK(r.err.find("absent.jsonl") != std::string::npos);
}

TEST_CASE("audit of perfect predictions shows no disparity") {
  TempDir dir;
  std::ofstream csv(dir / "p.csv");
  csv << "id,task,score,label,ethnicity,insurance,age_bucket\n";
  const char* eth[] = {"White", "Black", "Asian", "Hispanic"};
  for (int i = 0; i < 12; ++i) {
    const int y = i % 3 == 0;
    csv << "p" << i << ",mortality," << y << ".0," << y << "," << eth[i % 4]
        << ",Medicare,70+\n";
  }
  csv.close();
  const auto r = run({"audit", "--predictions", dir / "p.csv"});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["eddi_overall"].get<double>() == 0.0);
  CHECK(j["eo_overall"].get<double>() == 0.0);
}

TEST_CASE("audit reproduces the hand-worked error rates") {
  TempDir dir;
  std::ofstream csv(dir / "p.csv");
  csv << "id,task,score,label,ethnicity,insurance,age_bucket\n";
  // Ten rows, two errors, both among the four Black patients.
  const double scores[] = {0.9, 0.1, 0.9, 0.1, 0.9, 0.1, 0.9, 0.1, 0.9, 0.1};
  const int labels[] = {1, 0, 0, 1, 1, 0, 1, 0, 1, 0};
  for (int i = 0; i < 10; ++i) {
    const bool black = i >= 2 && i <= 5;
    csv << "r" << i << ",mortality," << scores[i] << "," << labels[i] << ","
        << (black ? "Black" : "White") << ",Private,15-29\n";
  }
  csv.close();
  const auto r = run({"audit", "--predictions", dir / "p.csv"});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  const auto& sub = j["eddi"]["ethnicity"]["subgroups"];
  // OER 0.2: White (0 - 0.2) / 0.8, Black (0.5 - 0.2) / 0.8.
  CHECK(sub["White"]["mortality"]["eddi"].get<double>() == doctest::Approx(-0.25).epsilon(1e-12));
  CHECK(sub["Black"]["mortality"]["eddi"].get<double>() == doctest::Approx(0.375).epsilon(1e-12));
  CHECK(sub["Black"]["mortality"]["error_rate"].get<double>() == 0.5);
  const double expected = std::sqrt(0.25 * 0.25 + 0.375 * 0.375) / 2.0;
  CHECK(j["eddi"]["ethnicity"]["value"].get<double>() == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("audit cites the malformed row") {
  TempDir dir;
  std::ofstream csv(dir / "p.csv");
  csv << "id,task,score,label,ethnicity,insurance,age_bucket\n"
      << "a,mortality,0.4,0,White,Private,70+\n"
      << "b,mortality,oops,1,White,Private,70+\n";
  csv.close();
  const auto r = run({"audit", "--predictions", dir / "p.csv"});
  CHECK(r.code == 1);
  CHECK(r.err.find("row 3") != std::string::npos);

  std::ofstream header(dir / "h.csv");
  header << "id,score\n";
  header.close();
  CHECK(run({"audit", "--predictions", dir / "h.csv"}).code == 1);
  CHECK(run({"audit", "--predictions", dir / "p.csv", "--threshold", "1.5"}).code == 2);
}

TEST_CASE("sweep emits one row per cell plus summaries") {
  TempDir dir;
  const auto cohort = make_cohort(dir, 200);
  const auto r = run(with_fast({"sweep", "--cohort", cohort, "--values", "0.2,1.0", "--seeds",
                                "0,1", "--max-epochs", "1"}));
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("kind,param,value,seed,auroc,auprc,eddi,eo\n", 0) == 0);
  CHECK(line_count(r.out) == 1 + 4 + 2);

  CHECK(run({"sweep", "--cohort", cohort, "--values", ""}).code == 2);
  CHECK(run({"sweep", "--cohort", cohort, "--values", "0.5", "--param", "beta"}).code == 2);
}

TEST_CASE("single-cell sweep matches train") {
  TempDir dir;
  const auto cohort_path = make_cohort(dir, 200);
  const auto cohort = load_cohort(cohort_path);
  KeyValueConfig base;
  for (std::size_t i = 0; i < kFast.size(); i += 2) {
    std::string key = kFast[i].substr(2);
    std::replace(key.begin(), key.end(), '-', '_');
    base.set(key, kFast[i + 1]);
  }
  const auto rows = cmd_sweep(cohort, base, "lambda", {0.4}, {3});
  REQUIRE(rows.size() == 2);
  KeyValueConfig cfg = base;
  cfg.set("lambda", "0.4");
  cfg.set("seed", "3");
  const auto trained = cmd_train(cohort_path, cfg, dir / "run");
  CHECK(rows[0].eddi == trained.run.test_report.eddi_overall);
  CHECK(rows[0].auprc == trained.run.test_report.mean_auprc());
  CHECK(rows[0].auroc == trained.run.test_report.mean_auroc());
  CHECK(rows[1].mean);
  CHECK(rows[1].eddi == rows[0].eddi);
}

TEST_CASE("ablate subsets and header") {
  TempDir dir;
  const auto cohort = make_cohort(dir, 200);
  const auto r = run(with_fast({"ablate", "--cohort", cohort, "--variants", "fame,average",
                                "--seeds", "0", "--max-epochs", "1"}));
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("variant,seeds,auroc,auprc,eddi,eo,w_demographic\n", 0) == 0);
  CHECK(line_count(r.out) == 3);
  CHECK(r.out.find("\nfame,1,") != std::string::npos);
  CHECK(r.out.find("\naverage,1,") != std::string::npos);

  CHECK(run({"ablate", "--cohort", cohort, "--variants", "magic", "--seeds", "0"}).code == 2);
  CHECK(run({"ablate", "--cohort", dir / "nope.jsonl"}).code == 1);
}

TEST_CASE("full ablation covers every variant") {
  TempDir dir;
  const auto cohort = load_cohort(make_cohort(dir, 150));
  KeyValueConfig base;
  base.set("shared_width", "4");
  base.set("hidden_width", "8");
  base.set("max_epochs", "1");
  const auto rows = cmd_ablate(cohort, base, kAblationVariants, {0});
  REQUIRE(rows.size() == 7);
  for (const auto& row : rows) {
    if (row.variant == "dfc" || row.variant.rfind("unimodal", 0) == 0) {
      CHECK(row.demographic_weight == 0.0);
    }
  }
}

TEST_CASE("per-task mode trains a single output") {
  TempDir dir;
  const auto cohort = make_cohort(dir, 200);
  const auto r = run(with_fast({"train", "--cohort", cohort, "-o", dir / "run", "--task", "mech_vent"}));
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["tasks"].size() == 1);
  CHECK(j["tasks"][0] == "mech_vent");
  CHECK(run(with_fast({"train", "--cohort", cohort, "-o", dir / "r2", "--task", "sepsis"})).code == 2);
}

TEST_CASE("output directory falls back to the environment") {
  TempDir dir;
  ::setenv("FAME_OUT_DIR", dir.path.c_str(), 1);
  CHECK(default_out_dir() == dir.path);
  const auto r = run({"generate", "--n", "50"});
  ::unsetenv("FAME_OUT_DIR");
  CHECK(r.code == 0);
  CHECK(fs::exists(dir.path / "cohort.jsonl"));
  CHECK(default_out_dir() == fs::path("fame_out"));
}

TEST_CASE("usage errors") {
  CHECK(run({}).code != 0);
  CHECK(run({"frobnicate"}).code != 0);
  CHECK(run({"train"}).code != 0);
}
