// Copyright 2026 The tritrain Authors. All Rights Reserved.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <doctest.h>

#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cli.hpp"
#include "run_config.hpp"
#include "test_util.hpp"
#include "tritrain/analysis.hpp"
#include "tritrain/checkpoint.hpp"

using namespace tritrain;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "tritrain");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

// Small, fast training overrides.
std::vector<std::string> small_train(const fs::path& out) {
  return {"train",        "-o",    out.string(),       "--set", "gen.n_source=120", "--set",
          "gen.n_target=120", "--set", "train.pretrain_iters=60", "--set", "train.steps=2", "--set",
          "label.n_init=10",  "--set", "adist.epochs=20"};
}

}  // namespace

TEST_CASE("help documents every key and exits 0") {
  const Result r = invoke({"--help"});
  CHECK(r.code == cli::kOk);
  for (const auto& k : cli::known_keys()) CHECK(r.out.find(k.key) != std::string::npos);
  CHECK(invoke({"train", "--help"}).code == cli::kOk);
  CHECK(invoke({}).code == cli::kUsage);
  CHECK(invoke({"frobnicate"}).code == cli::kUsage);
}

TEST_CASE("gen-data is deterministic and writes the spec sidecar") {
  const fs::path dir = testing::scratch_dir("gen");
  REQUIRE(invoke({"gen-data", "-o", (dir / "a").string(), "--seed", "7"}).code == 0);
  REQUIRE(invoke({"gen-data", "-o", (dir / "b").string(), "--seed", "7"}).code == 0);
  for (const char* f : {"source.csv", "target.csv", "shift_spec.ini"}) {
    CHECK(fs::exists(dir / "a" / f));
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  }
  CHECK(fs::exists(dir / "a" / "manifest.ini"));
  REQUIRE(invoke({"gen-data", "-o", (dir / "c").string(), "--seed", "8"}).code == 0);
  CHECK(slurp(dir / "a" / "source.csv") != slurp(dir / "c" / "source.csv"));
}

TEST_CASE("config errors name the offending key") {
  const fs::path dir = testing::scratch_dir("cfg");
  write_file(dir / "bad.ini", "[gen]\nrotaton_deg = 30\n");
  Result r = invoke({"gen-data", "-c", (dir / "bad.ini").string(), "-o", (dir / "o").string()});
  CHECK(r.code == cli::kUsage);
  CHECK(r.err.find("gen.rotaton_deg") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "o" / "manifest.ini"));

  r = invoke({"gen-data", "-o", (dir / "o").string(), "--set", "gen.n_source=many"});
  CHECK(r.code == cli::kUsage);
  CHECK(r.err.find("gen.n_source") != std::string::npos);

  write_file(dir / "top.ini", "seed = 1\n");
  CHECK(invoke({"gen-data", "-c", (dir / "top.ini").string()}).code == cli::kUsage);
  CHECK(invoke({"gen-data", "--set", "novalue"}).code == cli::kUsage);
  CHECK(invoke({"gen-data", "-c", (dir / "missing.ini").string()}).code == cli::kIo);
}

TEST_CASE("train writes the output tree and re-runs from its manifest bit-exactly") {
  const fs::path dir = testing::scratch_dir("train");
  const Result r = invoke(small_train(dir / "a"));
  REQUIRE(r.code == 0);
  for (const char* f : {"manifest.ini", "metrics.csv", "checkpoint.txt", "report.json", "pseudo_labels.csv"})
    CHECK(fs::exists(dir / "a" / f));
  CHECK(line_count(slurp(dir / "a" / "metrics.csv")) == 4);  // header + steps 0..2

  REQUIRE(invoke({"train", "-c", (dir / "a" / "manifest.ini").string(), "-o", (dir / "b").string()}).code == 0);
  CHECK(slurp(dir / "a" / "metrics.csv") == slurp(dir / "b" / "metrics.csv"));
  CHECK(slurp(dir / "a" / "checkpoint.txt") == slurp(dir / "b" / "checkpoint.txt"));

  const auto report = nlohmann::json::parse(slurp(dir / "a" / "report.json"));
  CHECK(report["schema_version"] == 1);
  CHECK(report.contains("d_A_raw"));
  CHECK(report.contains("d_A_features"));
  CHECK(report["final"]["step"] == 2);
}

TEST_CASE("train variants: steps 0, lambda 0, no batch norm") {
  const fs::path dir = testing::scratch_dir("variants");
  auto args = small_train(dir / "s0");
  args.insert(args.end(), {"--set", "train.steps=0"});
  REQUIRE(invoke(args).code == 0);
  CHECK(line_count(slurp(dir / "s0" / "metrics.csv")) == 2);

  args = small_train(dir / "l0");
  args.insert(args.end(), {"--set", "train.lambda=0"});
  REQUIRE(invoke(args).code == 0);
  CHECK(slurp(dir / "l0" / "manifest.ini").find("lambda = 0\n") != std::string::npos);
  const TrainingSession l0 = load_checkpoint_file(dir / "l0" / "checkpoint.txt");
  CHECK(l0.net.lambda() == 0.0);

  args = small_train(dir / "nobn");
  args.insert(args.end(), {"--set", "net.use_bn=false"});
  REQUIRE(invoke(args).code == 0);
  const TrainingSession nobn = load_checkpoint_file(dir / "nobn" / "checkpoint.txt");
  for (const auto& layer : nobn.net.part(Part::f).layers()) CHECK(layer.spec.kind != LayerKind::batch_norm);
}

TEST_CASE("train from CSV and sparse files") {
  const fs::path dir = testing::scratch_dir("files");
  REQUIRE(invoke({"gen-data", "-o", (dir / "g").string(), "--set", "gen.n_source=100", "--set", "gen.n_target=80"})
              .code == 0);
  auto args = small_train(dir / "t");
  args.insert(args.end(), {"--set", "data.source=" + (dir / "g" / "source.csv").string(), "--set",
                           "data.target=" + (dir / "g" / "target.csv").string(), "--set", "data.standardize=true"});
  REQUIRE(invoke(args).code == 0);
  CHECK(line_count(slurp(dir / "t" / "pseudo_labels.csv")) >= 1);

  std::string src, tgt;
  for (int i = 0; i < 40; ++i) {
    src += std::to_string(i % 2) + " " + std::to_string(i % 2) + ":1 2:0.5\n";
    tgt += std::to_string(i % 2) + " " + std::to_string(i % 2) + ":0.8 3:1\n";
  }
  write_file(dir / "s.txt", src);
  write_file(dir / "t.txt", tgt);
  args = small_train(dir / "bow");
  args.insert(args.end(), {"--set", "data.format=bow", "--set", "data.dim=4", "--set",
                           "data.source=" + (dir / "s.txt").string(), "--set",
                           "data.target=" + (dir / "t.txt").string()});
  CHECK(invoke(args).code == 0);

  write_file(dir / "broken.txt", "1 0:1\n0 9:1\n");
  args = small_train(dir / "x");
  args.insert(args.end(), {"--set", "data.format=bow", "--set", "data.dim=4", "--set",
                           "data.source=" + (dir / "s.txt").string(), "--set",
                           "data.target=" + (dir / "broken.txt").string()});
  const Result r = invoke(args);
  CHECK(r.code == cli::kParse);
  CHECK(r.err.find("line 2") != std::string::npos);

  args = small_train(dir / "y");
  args.insert(args.end(), {"--set", "data.source=" + (dir / "nope.csv").string(), "--set",
                           "data.target=" + (dir / "nope.csv").string()});
  CHECK(invoke(args).code == cli::kIo);
}

TEST_CASE("eval and adist read a checkpoint") {
  const fs::path dir = testing::scratch_dir("eval");
  REQUIRE(invoke(small_train(dir / "t")).code == 0);
  const std::string ckpt = (dir / "t" / "checkpoint.txt").string();
  const std::vector<std::string> data{"--set", "gen.n_source=120", "--set", "gen.n_target=120"};

  auto args = std::vector<std::string>{"eval", "-o", (dir / "e").string(), "--checkpoint", ckpt};
  args.insert(args.end(), data.begin(), data.end());
  Result r = invoke(args);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("acc_ft") != std::string::npos);
  CHECK(r.out.find("acc_f1") == std::string::npos);

  args.insert(args.end(), {"--branch", "all"});
  r = invoke(args);
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(slurp(dir / "e" / "eval.json"));
  for (const char* b : {"f1", "f2", "ft"}) CHECK(j["accuracy"].contains(b));

  // Accuracy printed by eval matches the final training row.
  const auto report = nlohmann::json::parse(slurp(dir / "t" / "report.json"));
  CHECK(j["accuracy"]["ft"].get<double>() == report["final"]["acc_ft"].get<double>());

  args.back() = "f4";
  CHECK(invoke(args).code == cli::kUsage);

  write_file(dir / "corrupt.txt", "tritrain-checkpoint 1\nnet 2 2 zz\n");
  CHECK(invoke({"eval", "--checkpoint", (dir / "corrupt.txt").string(), "-o", (dir / "e2").string()}).code ==
        cli::kParse);
  CHECK(invoke({"eval", "--checkpoint", (dir / "absent.txt").string(), "-o", (dir / "e2").string()}).code ==
        cli::kIo);
  CHECK(invoke({"eval", "-o", (dir / "e2").string()}).code == cli::kUsage);

  args = {"adist", "-o", (dir / "a").string(), "--checkpoint", ckpt, "--set", "adist.epochs=30"};
  args.insert(args.end(), data.begin(), data.end());
  r = invoke(args);
  REQUIRE(r.code == 0);
  const auto a = nlohmann::json::parse(slurp(dir / "a" / "adist.json"));
  CHECK(a["raw"]["d_A"].get<double>() >= 0.0);
  CHECK(a["f"]["d_A"].get<double>() <= 2.0);

  // Checkpoint trained on 2-D data against 3-feature data.
  write_file(dir / "s3.csv", "x0,x1,x2,label\n0,0,0,0\n1,1,1,1\n");
  CHECK(invoke({"eval", "--checkpoint", ckpt, "-o", (dir / "e3").string(), "--set",
             "data.source=" + (dir / "s3.csv").string(), "--set", "data.target=" + (dir / "s3.csv").string()})
            .code == cli::kInput);
}

TEST_CASE("bound-check: clean default, caught fault, parseable reports") {
  const fs::path dir = testing::scratch_dir("bound");
  Result r = invoke({"bound-check", "-o", (dir / "ok").string()});
  CHECK(r.code == cli::kOk);
  for (const char* f : {"bound_theorem1.json", "bound_rho.json"}) {
    std::ifstream in(dir / "ok" / f);
    const BoundReport rep = read_bound_report_json(in);
    CHECK(rep.violations.empty());
    CHECK(rep.n_hypotheses > 0);
  }
  r = invoke({"bound-check", "-o", (dir / "bad").string(), "--inject-fault"});
  CHECK(r.code == cli::kVerification);
  std::ifstream in(dir / "bad" / "bound_theorem1.json");
  CHECK_FALSE(read_bound_report_json(in).violations.empty());

  r = invoke({"bound-check", "-o", (dir / "big").string(), "--set", "bound.n_source=20000", "--set",
           "bound.n_target=20000", "--set", "bound.thresholds_per_feature=100"});
  CHECK(r.code == cli::kUsage);
  CHECK(r.err.find("too large") != std::string::npos);
}

TEST_CASE("resolved manifest lists every key of the command's sections") {
  cli::RunConfig c;
  c.set("train.lambda", "0");
  std::ostringstream os;
  const std::vector<std::string> sections{"train", "label"};
  c.write_resolved(os, sections);
  std::istringstream is(os.str());
  const cli::RunConfig back = cli::RunConfig::parse(is);
  for (const auto& k : cli::known_keys()) {
    const std::string key = k.key;
    if (key.rfind("train.", 0) == 0 || key.rfind("label.", 0) == 0) {
      CHECK(back.has_explicit(key));
      CHECK(back.get(key) == c.get(key));
    }
  }
}
