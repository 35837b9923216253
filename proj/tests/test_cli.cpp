// Copyright 2026 The radt-lab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;
using radt::cli::ExitCode;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "radt-lab");
  std::ostringstream out, err;
  const int code = radt::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Fresh scratch directory per test case.
fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("radt_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

constexpr const char* kTinyConfig = R"([data]
env = linewalk
n_traj = 40
seed = 2

[model]
variant = radt
n_layers = 1
n_heads = 1
d_model = 8
context_length = 4
dropout = 0.1

[train]
steps = 12
batch_size = 4
warmup_steps = 2
eval_every = 6

[eval]
episodes = 2
seeds = 1,2
)";

fs::path write_config(const fs::path& dir, const std::string& text = kTinyConfig) {
  const fs::path p = dir / "run.ini";
  std::ofstream(p) << text;
  return p;
}

std::size_t count_lines(const std::string& s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = slurp(e.path());
  return files;
}

}  // namespace

TEST_CASE("gen-data writes a dataset with a header line") {
  const fs::path d = scratch("gen");
  Result r = run({"gen-data", "--env", "linewalk", "--n-traj", "200", "--seed", "1",
                  "--out", (d / "a").string()});
  REQUIRE(r.code == ExitCode::kOk);
  const std::string text = slurp(d / "a" / "dataset.jsonl");
  CHECK(count_lines(text) == 201);
  auto header = nlohmann::json::parse(text.substr(0, text.find('\n')));
  CHECK(header["format"] == "radt-lab-dataset");
  CHECK(header["n_traj"] == 200);
  auto summary = nlohmann::json::parse(slurp(d / "a" / "summary.json"));
  CHECK(summary["provenance"]["command"] == "gen-data");
  CHECK(summary["provenance"]["seed"] == "1");
  // Byte-identical on rerun.
  REQUIRE(run({"gen-data", "--env", "linewalk", "--n-traj", "200", "--seed", "1", "--out",
               (d / "b").string()})
              .code == ExitCode::kOk);
  CHECK(tree(d / "a") == tree(d / "b"));
}

TEST_CASE("seed falls back to RADT_LAB_SEED") {
  const fs::path d = scratch("envseed");
  setenv("RADT_LAB_SEED", "1", 1);
  REQUIRE(run({"gen-data", "--env", "delaychain", "--n-traj", "30", "--out",
               (d / "env").string()})
              .code == ExitCode::kOk);
  unsetenv("RADT_LAB_SEED");
  REQUIRE(run({"gen-data", "--env", "delaychain", "--n-traj", "30", "--seed", "1", "--out",
               (d / "flag").string()})
              .code == ExitCode::kOk);
  CHECK(tree(d / "env") == tree(d / "flag"));
  setenv("RADT_LAB_SEED", "-3", 1);
  CHECK(run({"gen-data", "--env", "delaychain", "--out", (d / "bad").string()}).code ==
        ExitCode::kUsage);
  unsetenv("RADT_LAB_SEED");
}

TEST_CASE("usage errors exit with 2") {
  const fs::path d = scratch("usage");
  CHECK(run({}).code == ExitCode::kUsage);
  CHECK(run({"frobnicate"}).code == ExitCode::kUsage);
  Result bad_env = run({"gen-data", "--env", "cartpole", "--out", d.string()});
  CHECK(bad_env.code == ExitCode::kUsage);
  CHECK(bad_env.err.find("cartpole") != std::string::npos);
  CHECK(run({"eval", "--checkpoint", (d / "missing.bin").string(), "--dataset",
             (d / "missing.jsonl").string(), "--out", d.string()})
            .code == ExitCode::kUsage);
  CHECK(run({"train", "--config", (d / "missing.ini").string(), "--out", d.string()}).code ==
        ExitCode::kUsage);
  write_config(d, "[data]\nenv = linewalk\n[nonsense]\nx = 1\n");
  CHECK(run({"train", "--config", (d / "run.ini").string(), "--out", d.string()}).code ==
        ExitCode::kUsage);
  write_config(d, "[data\nenv = linewalk\n");
  Result parse = run({"train", "--config", (d / "run.ini").string(), "--out", d.string()});
  CHECK(parse.code == ExitCode::kUsage);
  CHECK(parse.err.find("line 1") != std::string::npos);
  // Unreachable spread.
  CHECK(run({"gen-data", "--env", "linewalk", "--n-traj", "5", "--skill-min", "0.5",
             "--skill-max", "0.5", "--epsilon", "0", "--out", d.string()})
            .code == ExitCode::kUsage);
  // Malformed dataset.
  std::ofstream(d / "broken.jsonl") << "{\"format\":\n";
  CHECK(run({"stats", "--dataset", (d / "broken.jsonl").string()}).code == ExitCode::kUsage);
}

TEST_CASE("train, eval and probe pipeline") {
  const fs::path d = scratch("pipeline");
  const fs::path cfg = write_config(d);
  Result tr = run({"train", "--config", cfg.string(), "--out", (d / "t").string()});
  REQUIRE_MESSAGE(tr.code == ExitCode::kOk, tr.err);
  for (const char* f : {"dataset.jsonl", "metrics.csv", "checkpoint.bin", "checkpoint-6.bin",
                        "summary.json"})
    CHECK_MESSAGE(fs::exists(d / "t" / f), f);
  const std::string metrics = slurp(d / "t" / "metrics.csv");
  CHECK(metrics.rfind("# radt-lab ", 0) == 0);
  CHECK(count_lines(metrics) == 2 + 12);
  CHECK_FALSE(fs::exists(d / "t" / "checkpoint-12.bin"));

  const std::string ckpt = (d / "t" / "checkpoint.bin").string();
  const std::string data = (d / "t" / "dataset.jsonl").string();
  Result ev = run({"eval", "--checkpoint", ckpt, "--dataset", data, "--config", cfg.string(),
                   "--out", (d / "e").string()});
  REQUIRE_MESSAGE(ev.code == ExitCode::kOk, ev.err);
  auto summary = nlohmann::json::parse(slurp(d / "e" / "summary.json"));
  const auto& al = summary["alignment"];
  CHECK(al["targets"].size() == 7);
  CHECK(al["seeds"] == nlohmann::json::array({1, 2}));
  CHECK(al["grand_stderr"].get<double>() >= 0.0);
  // Header, column names, 7 targets x 2 seeds x 2 episodes.
  CHECK(count_lines(slurp(d / "e" / "alignment.csv")) == 2 + 7 * 2 * 2);
  const std::string svg = slurp(d / "e" / "traces.svg");
  CHECK(svg.rfind("<?xml", 0) == 0);
  CHECK(svg.find("<!-- radt-lab ") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);

  Result pr = run({"probe", "--checkpoint", ckpt, "--dataset", data, "--mode", "attention",
                   "--out", (d / "p").string()});
  REQUIRE_MESSAGE(pr.code == ExitCode::kOk, pr.err);
  auto probe = nlohmann::json::parse(slurp(d / "p" / "summary.json"));
  CHECK(probe["site"] == "block0.seqra");
  CHECK(probe["overall"]["returns"].get<double>() == 1.0);
  CHECK(probe["min_return_fraction"].get<double>() == 1.0);
  Result trace = run({"probe", "--checkpoint", ckpt, "--dataset", data, "--mode", "rtg-trace",
                      "--episodes", "2", "--out", (d / "p2").string()});
  CHECK(trace.code == ExitCode::kOk);
  CHECK(run({"probe", "--checkpoint", ckpt, "--dataset", data, "--mode", "bogus", "--out",
             (d / "p3").string()})
            .code == ExitCode::kUsage);
}

TEST_CASE("a checkpoint that does not match the config is an integrity error") {
  const fs::path d = scratch("integrity");
  const fs::path cfg = write_config(d);
  REQUIRE(run({"train", "--config", cfg.string(), "--out", (d / "t").string()}).code ==
          ExitCode::kOk);
  std::string other = kTinyConfig;
  other.replace(other.find("d_model = 8"), 11, "d_model = 12");
  std::ofstream(d / "other.ini") << other;
  CHECK(run({"eval", "--checkpoint", (d / "t" / "checkpoint.bin").string(), "--dataset",
             (d / "t" / "dataset.jsonl").string(), "--config", (d / "other.ini").string(),
             "--out", (d / "e").string()})
            .code == ExitCode::kIntegrity);
  // A corrupted checkpoint is also an integrity error.
  std::string bytes = slurp(d / "t" / "checkpoint.bin");
  bytes[bytes.size() / 2] ^= 0x5a;
  std::ofstream(d / "bad.bin", std::ios::binary) << bytes;
  CHECK(run({"eval", "--checkpoint", (d / "bad.bin").string(), "--dataset",
             (d / "t" / "dataset.jsonl").string(), "--out", (d / "e2").string()})
            .code == ExitCode::kIntegrity);
}

TEST_CASE("train and eval are byte-identical on rerun") {
  const fs::path d = scratch("rerun");
  const fs::path cfg = write_config(d);
  for (const char* name : {"a", "b"}) {
    const fs::path out = d / name;
    REQUIRE(run({"train", "--config", cfg.string(), "--out", (out / "t").string()}).code ==
            ExitCode::kOk);
    REQUIRE(run({"eval", "--checkpoint", (out / "t" / "checkpoint.bin").string(), "--dataset",
                 (out / "t" / "dataset.jsonl").string(), "--episodes", "3", "--out",
                 (out / "e").string()})
                .code == ExitCode::kOk);
  }
  CHECK(tree(d / "a") == tree(d / "b"));
}

TEST_CASE("ablate normalizes by the baseline") {
  const fs::path d = scratch("ablate");
  const fs::path cfg = write_config(d);
  Result r = run({"ablate", "--config", cfg.string(), "--variants", "full,dt", "--seeds", "1",
                  "--out", (d / "a").string()});
  REQUIRE_MESSAGE(r.code == ExitCode::kOk, r.err);
  CHECK(r.out.find("variant,linewalk\n") != std::string::npos);
  CHECK(r.out.find("\ndt,1\n") != std::string::npos);
  auto summary = nlohmann::json::parse(slurp(d / "a" / "summary.json"));
  CHECK(summary["variants"].size() == 2);
  CHECK(summary["variants"][1]["dt_normalized"].get<double>() == 1.0);
  for (const char* f : {"dataset.jsonl", "alignment.csv", "summary.json", "traces.svg",
                        "full/seed1/checkpoint.bin", "dt/seed1/metrics.csv"})
    CHECK_MESSAGE(fs::exists(d / "a" / f), f);
  CHECK(run({"ablate", "--config", cfg.string(), "--variants", "full,unknown", "--out",
             (d / "b").string()})
            .code == ExitCode::kUsage);
  CHECK(run({"ablate", "--config", cfg.string(), "--seeds", "1,1", "--out",
             (d / "c").string()})
            .code == ExitCode::kUsage);
}
