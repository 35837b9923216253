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

#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "radt/config.hpp"
#include "radt/data.hpp"
#include "radt/envs.hpp"
#include "radt/error.hpp"
#include "radt/eval.hpp"
#include "radt/model.hpp"
#include "radt/svg.hpp"
#include "radt/train.hpp"
#include "radt/version.hpp"

namespace radt::cli {
namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

// Usage and input problems that are not library errors.
class UsageError : public Error {
 public:
  using Error::Error;
};

// An ablation finished with some failed runs.
class PartialFailure : public Error {
 public:
  using Error::Error;
};

std::string hex(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

// ---------------------------------------------------------------------------
// Seeds

std::optional<std::uint64_t> env_seed() {
  const char* v = std::getenv("RADT_LAB_SEED");
  if (v == nullptr || *v == '\0') return std::nullopt;
  char* end = nullptr;
  errno = 0;
  const unsigned long long s = std::strtoull(v, &end, 10);
  if (errno != 0 || *end != '\0' || *v == '-')
    throw UsageError("RADT_LAB_SEED must be a non-negative integer, got '" +
                     std::string(v) + "'");
  return s;
}

std::uint64_t default_seed() { return env_seed().value_or(0); }

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty() || item.find_first_not_of("0123456789") != std::string::npos)
      throw UsageError("bad seed '" + item + "' in list '" + text + "'");
    out.push_back(std::stoull(item));
  }
  if (out.empty()) throw UsageError("empty seed list");
  std::vector<std::uint64_t> sorted = out;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw UsageError("duplicate seed in list '" + text + "'");
  return out;
}

std::string seed_list_text(const std::vector<std::uint64_t>& seeds) {
  std::string s;
  for (std::size_t i = 0; i < seeds.size(); ++i)
    s += (i ? "," : "") + std::to_string(seeds[i]);
  return s;
}

// ---------------------------------------------------------------------------
// Files

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("failed while writing '" + path.string() + "'");
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw UsageError(what + " path is required");
  if (!fs::is_regular_file(path)) throw UsageError(what + " '" + path + "' does not exist");
}

fs::path prepare_out(const std::string& out) {
  if (out.empty()) throw UsageError("--out is required");
  fs::create_directories(out);
  return fs::path(out);
}

// Provenance carried by every output file.
struct Provenance {
  std::string command;
  std::uint64_t config_digest = 0;
  std::string seed;

  std::string line(const char* comment) const {
    return std::string(comment) + " radt-lab " + kVersion + " command=" + command +
           " config_digest=" + hex(config_digest) + " seed=" + seed + "\n";
  }
  ojson json() const {
    ojson j;
    j["tool"] = "radt-lab";
    j["version"] = kVersion;
    j["command"] = command;
    j["config_digest"] = hex(config_digest);
    j["seed"] = seed;
    return j;
  }
  std::string csv(const std::string& body) const { return line("#") + body; }
  std::string svg(const std::string& body) const {
    const std::size_t p = body.find('\n') + 1;  // after the XML declaration
    return body.substr(0, p) + "<!--" + line("").substr(0, line("").size() - 1) + " -->\n" +
           body.substr(p);
  }
};

std::string dump(const ojson& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Run configuration

struct DataSettings {
  std::string env = "linewalk";
  std::size_t n_traj = 200;
  std::uint64_t seed = 1;
  PolicyMix mix;
  std::string path;  // load instead of generating when set
};

struct EvalSettings {
  std::size_t episodes = 10;
  std::vector<std::uint64_t> seeds{1, 2, 3};
};

struct RunConfig {
  DataSettings data;
  RadtConfig model;
  TrainConfig train;
  EvalSettings eval;
  fs::path base_dir;  // relative data paths resolve against the config file

  std::string canonical_text() const {
    IniDocument doc;
    doc.set("data", "env", data.env);
    doc.set("data", "n_traj", std::to_string(data.n_traj));
    doc.set("data", "seed", std::to_string(data.seed));
    doc.set("data", "skill_min", format_double(data.mix.skill_min));
    doc.set("data", "skill_max", format_double(data.mix.skill_max));
    doc.set("data", "epsilon", format_double(data.mix.epsilon));
    doc.set("data", "min_spread", format_double(data.mix.min_spread));
    if (!data.path.empty()) doc.set("data", "path", data.path);
    model.to_ini(doc);
    train.to_ini(doc);
    doc.set("eval", "episodes", std::to_string(eval.episodes));
    doc.set("eval", "seeds", seed_list_text(eval.seeds));
    return doc.to_text();
  }
  std::uint64_t digest() const { return fnv1a64(canonical_text()); }
};

RunConfig load_run_config(const std::string& path) {
  require_file(path, "config");
  IniDocument doc = IniDocument::load(path);
  for (const auto& s : doc.sections())
    if (s != "data" && s != "model" && s != "train" && s != "eval")
      throw UsageError("config '" + path + "': unknown section [" + s +
                       "] (expected data, model, train, eval)");
  RunConfig rc;
  rc.base_dir = fs::path(path).parent_path();
  doc.expect_keys("data", {"env", "n_traj", "seed", "skill_min", "skill_max", "epsilon",
                           "min_spread", "path"});
  rc.data.env = doc.get_string("data", "env", rc.data.env);
  const EnvSpec& spec = env_spec(rc.data.env);
  rc.data.n_traj = doc.get_size("data", "n_traj", rc.data.n_traj);
  rc.data.seed = doc.get_size("data", "seed", rc.data.seed);
  rc.data.mix.skill_min = doc.get_double("data", "skill_min", rc.data.mix.skill_min);
  rc.data.mix.skill_max = doc.get_double("data", "skill_max", rc.data.mix.skill_max);
  rc.data.mix.epsilon = doc.get_double("data", "epsilon", rc.data.mix.epsilon);
  rc.data.mix.min_spread = doc.get_double("data", "min_spread", rc.data.mix.min_spread);
  rc.data.path = doc.get_string("data", "path", "");

  // State and action spaces default to the env's.
  if (!doc.has("model", "state_dim"))
    doc.set("model", "state_dim", std::to_string(spec.state_dim));
  if (!doc.has("model", "action_space"))
    doc.set("model", "action_space", spec.action.discrete ? "discrete" : "continuous");
  if (!doc.has("model", "action_size"))
    doc.set("model", "action_size", std::to_string(spec.action.size));
  if (!doc.has("model", "action_bound"))
    doc.set("model", "action_bound", format_double(spec.action.bound));
  if (!doc.has("model", "max_timesteps"))
    doc.set("model", "max_timesteps", std::to_string(spec.horizon));
  rc.model = RadtConfig::from_ini(doc);
  if (!doc.has("train", "seed")) doc.set("train", "seed", std::to_string(default_seed()));
  rc.train = TrainConfig::from_ini(doc);

  doc.expect_keys("eval", {"episodes", "seeds"});
  rc.eval.episodes = doc.get_size("eval", "episodes", rc.eval.episodes);
  if (rc.eval.episodes == 0) throw UsageError("eval.episodes must be >= 1");
  rc.eval.seeds = parse_seed_list(doc.get_string("eval", "seeds", "1,2,3"));
  if (!rc.data.path.empty()) require_file((rc.base_dir / rc.data.path).string(), "dataset");
  return rc;
}

Dataset resolve_dataset(const RunConfig& rc) {
  if (!rc.data.path.empty()) {
    Dataset d = load_dataset((rc.base_dir / rc.data.path).string());
    if (env_spec(d.env).name != rc.data.env)
      throw UsageError("dataset env '" + env_spec(d.env).name + "' differs from data.env '" +
                       rc.data.env + "'");
    return d;
  }
  return generate_dataset(env_spec(rc.data.env), rc.data.mix, rc.data.n_traj, rc.data.seed);
}

std::string dataset_text(const Dataset& d) {
  std::ostringstream s;
  write_dataset(s, d);
  return s.str();
}

// ---------------------------------------------------------------------------
// Shared pieces of train / eval / ablate

struct TrainOutcome {
  Model model;
  TrainResult result;
};

TrainOutcome train_into(const fs::path& dir, const RadtConfig& mc, const TrainConfig& tc,
                        const Dataset& data, const Provenance& prov) {
  TrainOutcome o{Model(mc, tc.seed), {}};
  std::ostringstream metrics;
  TrainSinks sinks;
  sinks.metrics = &metrics;
  sinks.checkpoint = [&](std::size_t step, const Model& m) {
    const fs::path p = step == tc.steps ? dir / "checkpoint.bin"
                                        : dir / ("checkpoint-" + std::to_string(step) + ".bin");
    save_model(p.string(), m);
  };
  o.result = train(o.model, data, tc, sinks);
  write_file(dir / "metrics.csv", prov.csv(metrics.str()));
  return o;
}

Chart error_chart(const std::string& title,
                  const std::vector<std::pair<std::string, AlignmentReport>>& reports) {
  Chart c{title, "normalized target return", "normalized absolute error", {}};
  for (const auto& [name, r] : reports) {
    Series s{name, {}, r.target_mean, r.target_stderr};
    for (double t : r.grid.targets) s.x.push_back(r.grid.normalized(t));
    c.series.push_back(std::move(s));
  }
  return c;
}

Chart trace_chart(const std::string& title,
                  const std::vector<std::pair<std::string, RtgTrace>>& traces) {
  Chart c{title, "step", "return-to-go", {}};
  for (const auto& [name, tr] : traces) {
    Series s{name, {}, tr.mean, tr.stderr_};
    for (std::size_t t = 0; t < tr.mean.size(); ++t) s.x.push_back(static_cast<double>(t));
    c.series.push_back(std::move(s));
  }
  return c;
}

// Groups episodes by target index and builds one trace per target.
std::vector<RtgTrace> traces_by_target(const TargetGrid& grid,
                                       const std::vector<EpisodeRecord>& eps) {
  std::vector<RtgTrace> out;
  for (double t : grid.targets) {
    std::vector<EpisodeRecord> group;
    for (const auto& e : eps)
      if (e.target == t) group.push_back(e);
    out.push_back(trace_from_episodes(t, group));
  }
  return out;
}

ojson report_json(const AlignmentReport& r) { return ojson::parse(alignment_json(r)); }

void print_report(std::ostream& out, const AlignmentReport& r) {
  out << "target      normalized  abs_err_norm  stderr\n";
  for (std::size_t i = 0; i < r.grid.targets.size(); ++i) {
    out << std::fixed << std::setprecision(4) << std::setw(10) << r.grid.targets[i]
        << std::setw(12) << std::setprecision(2)
        << std::clamp(r.grid.normalized(r.grid.targets[i]), 0.0, 100.0)
        << std::setw(14) << std::setprecision(4) << r.target_mean[i] << std::setw(10)
        << r.target_stderr[i] << "\n";
  }
  out << "grand mean " << std::setprecision(4) << r.grand_mean << " +/- " << r.grand_stderr
      << "\n";
  out.unsetf(std::ios::floatfield);
}

// ---------------------------------------------------------------------------
// Commands

int cmd_gen_data(const std::string& env, std::size_t n_traj, std::optional<std::uint64_t> seed,
                 const PolicyMix& mix, const std::string& out_dir, std::ostream& out) {
  const EnvSpec& spec = env_spec(env);
  const std::uint64_t s = seed ? *seed : default_seed();
  if (n_traj == 0) throw UsageError("--n-traj must be >= 1");
  fs::path dir = prepare_out(out_dir);
  Dataset d = generate_dataset(spec, mix, n_traj, s);
  const std::string text = dataset_text(d);
  write_file(dir / "dataset.jsonl", text);
  DatasetStats st = dataset_stats(d);
  ojson j;
  Provenance prov{"gen-data", fnv1a64(text), std::to_string(s)};
  j["provenance"] = prov.json();
  j["dataset_digest"] = hex(fnv1a64(text));
  j["stats"] = ojson::parse(stats_json(d, st));
  write_file(dir / "summary.json", dump(j));
  out << "wrote " << n_traj << " " << spec.name << " trajectories, returns "
      << format_double(st.min) << " .. " << format_double(st.max) << ", spread "
      << format_double(st.spread) << "\n";
  return kOk;
}

int cmd_stats(const std::string& path, const std::string& out_dir, std::ostream& out) {
  require_file(path, "dataset");
  Dataset d = load_dataset(path);
  const std::string js = stats_json(d, dataset_stats(d));
  out << js;
  if (!out_dir.empty()) {
    fs::path dir = prepare_out(out_dir);
    ojson j;
    Provenance prov{"stats", fnv1a64(dataset_text(d)), std::to_string(d.seed)};
    j["provenance"] = prov.json();
    j["stats"] = ojson::parse(js);
    write_file(dir / "summary.json", dump(j));
  }
  return kOk;
}

int cmd_train(const std::string& config, std::optional<std::uint64_t> seed,
              const std::string& out_dir, std::ostream& out) {
  RunConfig rc = load_run_config(config);
  if (seed) rc.train.seed = *seed;
  fs::path dir = prepare_out(out_dir);
  Dataset data = resolve_dataset(rc);
  const std::string text = dataset_text(data);
  write_file(dir / "dataset.jsonl", text);
  Provenance prov{"train", rc.digest(), std::to_string(rc.train.seed)};
  TrainOutcome o = train_into(dir, rc.model, rc.train, data, prov);
  ojson j;
  j["provenance"] = prov.json();
  j["config"] = rc.canonical_text();
  j["dataset_digest"] = hex(fnv1a64(text));
  j["model"] = ojson::parse(o.model.summary_json());
  j["steps"] = rc.train.steps;
  if (!o.result.history.empty()) j["final_loss"] = o.result.history.back().loss;
  write_file(dir / "summary.json", dump(j));
  out << "trained " << variant_name(rc.model.variant) << " for " << rc.train.steps
      << " steps";
  if (!o.result.history.empty()) out << ", final loss " << format_double(o.result.history.back().loss);
  out << "\n";
  return kOk;
}

Model load_checked(const std::string& checkpoint, const std::string& config) {
  require_file(checkpoint, "checkpoint");
  Model m = load_model(checkpoint);
  if (!config.empty()) {
    RunConfig rc = load_run_config(config);
    if (rc.model.digest() != m.config().digest())
      throw IntegrityError("checkpoint config digest " + hex(m.config().digest()) +
                           " does not match the [model] section of '" + config + "' (" +
                           hex(rc.model.digest()) + ")");
  }
  return m;
}

int cmd_eval(const std::string& checkpoint, const std::string& dataset,
             const std::string& config, std::optional<std::size_t> episodes,
             const std::string& seeds_text, const std::string& out_dir, std::ostream& out) {
  require_file(dataset, "dataset");
  Model m = load_checked(checkpoint, config);
  Dataset data = load_dataset(dataset);
  const EnvSpec& spec = env_spec(data.env);
  // Flags override the config's [eval] section; without a config a set
  // RADT_LAB_SEED selects a single seed.
  EvalSettings es;
  if (!config.empty()) es = load_run_config(config).eval;
  else if (auto s = env_seed()) es.seeds = {*s};
  const std::size_t n = episodes.value_or(es.episodes);
  if (n == 0) throw UsageError("--episodes must be >= 1");
  const std::vector<std::uint64_t> seeds =
      seeds_text.empty() ? es.seeds : parse_seed_list(seeds_text);
  fs::path dir = prepare_out(out_dir);
  const TargetGrid grid = build_target_grid(data);
  const Policy policy = greedy_policy(m, spec);
  const std::string variant(variant_name(m.config().variant));
  std::vector<AlignmentRow> rows;
  std::vector<EpisodeRecord> eps;
  for (std::uint64_t s : seeds) {
    std::vector<EpisodeRecord> part_eps;
    auto part = alignment_rows(policy, spec, grid, n, s, variant, &part_eps);
    rows.insert(rows.end(), part.begin(), part.end());
    eps.insert(eps.end(), part_eps.begin(), part_eps.end());
  }
  AlignmentReport r = summarize_alignment(grid, rows);
  Provenance prov{"eval", m.config().digest(), seed_list_text(seeds)};
  write_file(dir / "alignment.csv", prov.csv(alignment_csv(r.rows)));
  ojson j;
  j["provenance"] = prov.json();
  j["variant"] = variant;
  j["env"] = spec.name;
  j["episodes"] = n;
  j["alignment"] = report_json(r);
  j["max_return"] = max_return_eval(policy, spec, grid, n, seeds.front());
  write_file(dir / "summary.json", dump(j));
  std::vector<std::pair<std::string, RtgTrace>> named;
  for (const auto& tr : traces_by_target(grid, eps))
    named.emplace_back("target " + format_double(tr.target), tr);
  write_file(dir / "traces.svg",
             prov.svg(svg_stack({error_chart("alignment error by target", {{variant, r}}),
                                 trace_chart("return-to-go by step", named)})));
  print_report(out, r);
  return kOk;
}

int cmd_probe(const std::string& checkpoint, const std::string& dataset,
              const std::string& mode, std::optional<std::size_t> episodes,
              std::optional<std::uint64_t> seed, const std::string& out_dir,
              std::ostream& out) {
  if (mode != "attention" && mode != "rtg-trace")
    throw UsageError("--mode must be attention or rtg-trace, got '" + mode + "'");
  require_file(dataset, "dataset");
  Model m = load_checked(checkpoint, "");
  Dataset data = load_dataset(dataset);
  const EnvSpec& spec = env_spec(data.env);
  const std::size_t n = episodes.value_or(10);
  if (n == 0) throw UsageError("--episodes must be >= 1");
  const std::uint64_t s = seed ? *seed : default_seed();
  fs::path dir = prepare_out(out_dir);
  const TargetGrid grid = build_target_grid(data);
  Provenance prov{"probe " + mode, m.config().digest(), std::to_string(s)};
  ojson j;
  j["provenance"] = prov.json();
  j["variant"] = variant_name(m.config().variant);
  j["mode"] = mode;
  if (mode == "attention") {
    ProbeReport r = attention_probe(m, spec, grid, n, s);
    write_file(dir / "probe.csv", prov.csv(probe_csv(r)));
    Chart c{"first-layer attention mass at " + r.site, "normalized target return",
            "attention mass", {}};
    Series ret{"return", {}, {}, {}}, st{"state", {}, {}, {}}, act{"action", {}, {}, {}};
    for (std::size_t i = 0; i < r.targets.size(); ++i) {
      const double x = grid.normalized(r.targets[i]);
      ret.x.push_back(x);
      st.x.push_back(x);
      act.x.push_back(x);
      ret.y.push_back(r.per_target[i].returns);
      st.y.push_back(r.per_target[i].states);
      act.y.push_back(r.per_target[i].actions);
    }
    c.series = {ret, st, act};
    write_file(dir / "traces.svg", prov.svg(svg_line_chart(c)));
    j["site"] = r.site;
    j["overall"] = {{"returns", r.overall.returns},
                    {"states", r.overall.states},
                    {"actions", r.overall.actions}};
    j["min_return_fraction"] = r.min_return_fraction;
    out << "site " << r.site << ": return " << format_double(r.overall.returns) << ", state "
        << format_double(r.overall.states) << ", action " << format_double(r.overall.actions)
        << "\n";
  } else {
    auto traces = rtg_trace(greedy_policy(m, spec), spec, grid.targets, n, s);
    write_file(dir / "probe.csv", prov.csv(trace_csv(traces)));
    std::vector<std::pair<std::string, RtgTrace>> named;
    for (const auto& tr : traces) named.emplace_back("target " + format_double(tr.target), tr);
    write_file(dir / "traces.svg", prov.svg(svg_line_chart(trace_chart("return-to-go by step", named))));
    ojson finals = ojson::array();
    for (const auto& tr : traces)
      finals.push_back({{"target", tr.target}, {"final_rtg_mean", tr.mean.back()},
                        {"final_rtg_stderr", tr.stderr_.back()}});
    j["final_rtg"] = finals;
    for (const auto& tr : traces)
      out << "target " << format_double(tr.target) << ": final rtg "
          << format_double(tr.mean.back()) << "\n";
  }
  write_file(dir / "summary.json", dump(j));
  return kOk;
}

// Ablation variants as switches over the [model] section.
RadtConfig apply_variant(RadtConfig c, const std::string& v) {
  c.variant = Variant::kRadt;
  c.use_seqra = c.use_stepra = c.use_adaptive_scaling = true;
  if (v == "full") return c;
  if (v == "no-seqra") {
    c.use_seqra = false;
    c.use_adaptive_scaling = false;
    return c;
  }
  if (v == "no-stepra") {
    c.use_stepra = false;
    return c;
  }
  if (v == "no-adascale") {
    c.use_adaptive_scaling = false;
    return c;
  }
  if (v == "no-stepra-no-adascale") {
    c.use_stepra = false;
    c.use_adaptive_scaling = false;
    return c;
  }
  if (v == "dt") {
    c.variant = Variant::kDt;
    return c;
  }
  throw UsageError("unknown variant '" + v +
                   "' (expected full, no-seqra, no-stepra, no-adascale, "
                   "no-stepra-no-adascale, dt)");
}

struct AblationRun {
  std::string variant;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::vector<AlignmentRow> rows;
  std::vector<EpisodeRecord> episodes;
};

int cmd_ablate(const std::string& config, const std::string& variants_text,
               const std::string& seeds_text, std::size_t jobs, const std::string& out_dir,
               std::ostream& out, std::ostream& err) {
  RunConfig rc = load_run_config(config);
  std::vector<std::string> variants;
  {
    std::stringstream ss(variants_text);
    std::string v;
    while (std::getline(ss, v, ','))
      if (!v.empty()) variants.push_back(v);
  }
  if (variants.empty()) throw UsageError("--variants is empty");
  for (const auto& v : variants) apply_variant(rc.model, v);
  const std::vector<std::uint64_t> seeds =
      seeds_text.empty() ? rc.eval.seeds : parse_seed_list(seeds_text);
  if (jobs == 0) throw UsageError("--jobs must be >= 1");
  fs::path dir = prepare_out(out_dir);
  Dataset data = resolve_dataset(rc);
  const std::string text = dataset_text(data);
  write_file(dir / "dataset.jsonl", text);
  const EnvSpec& spec = env_spec(data.env);
  const TargetGrid grid = build_target_grid(data);
  const std::uint64_t digest = rc.digest();

  std::vector<AblationRun> runs;
  for (const auto& v : variants)
    for (std::uint64_t s : seeds) {
      AblationRun run;
      run.variant = v;
      run.seed = s;
      runs.push_back(std::move(run));
    }
  std::atomic<std::size_t> next{0};
  std::mutex log_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < runs.size(); i = next++) {
      AblationRun& run = runs[i];
      try {
        const fs::path rd = dir / run.variant / ("seed" + std::to_string(run.seed));
        fs::create_directories(rd);
        TrainConfig tc = rc.train;
        tc.seed = run.seed;
        RadtConfig mc = apply_variant(rc.model, run.variant);
        Provenance prov{"ablate " + run.variant, digest, std::to_string(run.seed)};
        TrainOutcome o = train_into(rd, mc, tc, data, prov);
        run.rows = alignment_rows(greedy_policy(o.model, spec), spec, grid, rc.eval.episodes,
                                  run.seed, run.variant, &run.episodes);
        AlignmentReport r = summarize_alignment(grid, run.rows);
        write_file(rd / "alignment.csv", prov.csv(alignment_csv(run.rows)));
        ojson j;
        j["provenance"] = prov.json();
        j["alignment"] = report_json(r);
        write_file(rd / "summary.json", dump(j));
        run.ok = true;
        std::lock_guard lock(log_mu);
        err << "[ablate] " << run.variant << " seed " << run.seed << ": grand mean "
            << format_double(r.grand_mean) << "\n";
      } catch (const std::exception& e) {
        run.error = e.what();
        std::lock_guard lock(log_mu);
        err << "[ablate] " << run.variant << " seed " << run.seed << " failed: " << e.what()
            << "\n";
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < std::min(jobs, runs.size()); ++t) pool.emplace_back(worker);
    worker();
  }

  // Aggregate per variant over the seeds that succeeded.
  std::map<std::string, AlignmentReport> reports;
  std::map<std::string, double> final_rtg;
  std::vector<AlignmentRow> all_rows;
  std::vector<std::pair<std::string, RtgTrace>> top_traces;
  ojson failed = ojson::array();
  for (const auto& v : variants) {
    std::vector<AlignmentRow> rows;
    std::vector<EpisodeRecord> top;
    for (const auto& run : runs) {
      if (run.variant != v) continue;
      if (!run.ok) {
        failed.push_back({{"variant", v}, {"seed", run.seed}, {"error", run.error}});
        continue;
      }
      rows.insert(rows.end(), run.rows.begin(), run.rows.end());
      for (const auto& e : run.episodes)
        if (e.target == grid.targets.back()) top.push_back(e);
    }
    all_rows.insert(all_rows.end(), rows.begin(), rows.end());
    if (rows.empty()) continue;
    reports.emplace(v, summarize_alignment(grid, rows));
    double f = 0.0;
    for (const auto& e : top) f += std::abs(e.final_rtg()) / static_cast<double>(top.size());
    final_rtg[v] = f;
    top_traces.emplace_back(v, trace_from_episodes(grid.targets.back(), top));
  }

  Provenance prov{"ablate", digest, seed_list_text(seeds)};
  write_file(dir / "alignment.csv", prov.csv(alignment_csv(all_rows)));
  const bool have_dt = reports.count("dt") > 0 && reports.at("dt").grand_mean > 0.0;
  ojson table = ojson::array();
  std::ostringstream csv;
  csv << "variant," << spec.name << "\n";
  for (const auto& v : variants) {
    ojson row;
    row["variant"] = v;
    auto it = reports.find(v);
    if (it == reports.end()) {
      row["failed"] = true;
      table.push_back(row);
      csv << v << ",\n";
      continue;
    }
    const AlignmentReport& r = it->second;
    row["grand_mean"] = r.grand_mean;
    row["grand_stderr"] = r.grand_stderr;
    row["seed_mean"] = r.seed_mean;
    row["target_mean"] = r.target_mean;
    row["target_stderr"] = r.target_stderr;
    row["final_abs_rtg_top_target"] = final_rtg.at(v);
    if (have_dt) row["dt_normalized"] = r.grand_mean / reports.at("dt").grand_mean;
    const bool partial = r.seeds.size() != seeds.size();
    if (partial) row["partial"] = true;
    table.push_back(row);
    csv << v << ","
        << (have_dt ? format_double(r.grand_mean / reports.at("dt").grand_mean)
                    : format_double(r.grand_mean))
        << "\n";
  }
  ojson j;
  j["provenance"] = prov.json();
  j["config"] = rc.canonical_text();
  j["env"] = spec.name;
  j["seeds"] = seeds;
  j["q05"] = grid.q05;
  j["q95"] = grid.q95;
  j["targets"] = grid.targets;
  j["normalization"] = have_dt ? "dt" : "none";
  j["variants"] = table;
  j["failed"] = failed;
  write_file(dir / "summary.json", dump(j));
  std::vector<std::pair<std::string, AlignmentReport>> named(reports.begin(), reports.end());
  std::stable_sort(named.begin(), named.end(), [&](const auto& a, const auto& b) {
    return std::find(variants.begin(), variants.end(), a.first) <
           std::find(variants.begin(), variants.end(), b.first);
  });
  write_file(dir / "traces.svg",
             prov.svg(svg_stack({error_chart("alignment error by target", named),
                                 trace_chart("return-to-go at the top target", top_traces)})));
  out << (have_dt ? "DT-normalized alignment error\n" : "alignment error\n") << csv.str();
  if (!failed.empty())
    throw PartialFailure(std::to_string(failed.size()) + " of " + std::to_string(runs.size()) +
                         " runs failed; see summary.json");
  return kOk;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"radt-lab: return-aligned decision transformer lab"};
  app.name(args.empty() ? "radt-lab" : fs::path(args[0]).filename().string());
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("radt-lab ") + kVersion);

  std::string env, out_dir, config, checkpoint, dataset, seeds_text, variants_text, mode;
  std::size_t n_traj = 200, jobs = 1;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> episodes;
  PolicyMix mix;

  auto* gen = app.add_subcommand("gen-data", "Generate an offline dataset");
  gen->add_option("--env", env, "linewalk, gridcollect or delaychain")->required();
  gen->add_option("--n-traj", n_traj, "Number of trajectories")->capture_default_str();
  gen->add_option("--seed", seed, "Generation seed (default: RADT_LAB_SEED or 0)");
  gen->add_option("--skill-min", mix.skill_min)->capture_default_str();
  gen->add_option("--skill-max", mix.skill_max)->capture_default_str();
  gen->add_option("--epsilon", mix.epsilon)->capture_default_str();
  gen->add_option("--min-spread", mix.min_spread)->capture_default_str();
  gen->add_option("--out", out_dir, "Output directory")->required();

  auto* tr = app.add_subcommand("train", "Train one model from a config file");
  tr->add_option("--config", config, "INI run config")->required();
  tr->add_option("--seed", seed, "Overrides train.seed");
  tr->add_option("--out", out_dir, "Output directory")->required();

  auto* ev = app.add_subcommand("eval", "Return-alignment evaluation of a checkpoint");
  ev->add_option("--checkpoint", checkpoint)->required();
  ev->add_option("--dataset", dataset, "Dataset defining the target grid")->required();
  ev->add_option("--config", config, "Verify the checkpoint against this config");
  ev->add_option("--episodes", episodes, "Episodes per target and seed (default 10)");
  ev->add_option("--seeds", seeds_text, "Comma-separated evaluation seeds");
  ev->add_option("--out", out_dir)->required();

  auto* ab = app.add_subcommand("ablate", "Train and evaluate variants over seeds");
  ab->add_option("--config", config)->required();
  ab->add_option("--variants", variants_text)
      ->default_val("full,no-seqra,no-stepra,no-adascale,no-stepra-no-adascale,dt");
  ab->add_option("--seeds", seeds_text, "Comma-separated seeds (default: eval.seeds)");
  ab->add_option("--jobs", jobs, "Concurrent runs")->capture_default_str();
  ab->add_option("--out", out_dir)->required();

  auto* pr = app.add_subcommand("probe", "Attention or return-to-go probe of a checkpoint");
  pr->add_option("--checkpoint", checkpoint)->required();
  pr->add_option("--dataset", dataset)->required();
  pr->add_option("--mode", mode, "attention or rtg-trace")->required();
  pr->add_option("--episodes", episodes);
  pr->add_option("--seed", seed);
  pr->add_option("--out", out_dir)->required();

  auto* st = app.add_subcommand("stats", "Return statistics of a dataset");
  st->add_option("--dataset", dataset)->required();
  st->add_option("--out", out_dir);

  std::vector<std::string> rev(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
  std::reverse(rev.begin(), rev.end());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  if (*gen) return cmd_gen_data(env, n_traj, seed, mix, out_dir, out);
  if (*tr) return cmd_train(config, seed, out_dir, out);
  if (*ev) return cmd_eval(checkpoint, dataset, config, episodes, seeds_text, out_dir, out);
  if (*ab) return cmd_ablate(config, variants_text, seeds_text, jobs, out_dir, out, err);
  if (*pr) return cmd_probe(checkpoint, dataset, mode, episodes, seed, out_dir, out);
  if (*st) return cmd_stats(dataset, out_dir, out);
  return kUsage;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return dispatch(args, out, err);
  } catch (const PartialFailure& e) {
    err << "error: " << e.what() << "\n";
    return kPartial;
  } catch (const TrainingError& e) {
    err << "error: " << e.what() << "\n";
    return kPartial;
  } catch (const IntegrityError& e) {
    err << "error: " << e.what() << "\n";
    return kIntegrity;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const GenerationError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\nrun with --help for usage\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kInternal;
  }
}

}  // namespace radt::cli
