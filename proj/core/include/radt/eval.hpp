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


#ifndef RADT_EVAL_HPP_
#define RADT_EVAL_HPP_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "radt/aligners.hpp"
#include "radt/data.hpp"
#include "radt/envs.hpp"
#include "radt/model.hpp"

namespace radt {

inline constexpr std::size_t kGridPoints = 7;

// Seven equally spaced targets from q05 to q95, inclusive. Targets are
// rounded to the 2^-32 grid so that return-to-go bookkeeping is exact.
struct TargetGrid {
  double q05 = 0.0, q95 = 0.0;
  std::vector<double> targets;

  double spread() const { return q95 - q05; }
  // Affine map with q05 -> 0 and q95 -> 100.
  double normalized(double value) const;
};

TargetGrid target_grid(double q05, double q95);
// Needs at least 20 trajectories and q05 < q95.
TargetGrid build_target_grid(const Dataset& data);

// Maps a batch of windows to one action per row, for the last timestep.
// Returns [B x action width]: class indices for discrete actions.
struct Policy {
  std::size_t context_length = 1;
  std::function<std::vector<double>(const Window&)> act;
};

// Greedy model policy: argmax for discrete heads, the mean for continuous.
// Attention scores are recorded into `sink` when given.
Policy greedy_policy(const Model& model, const EnvSpec& spec,
                     AttentionSink* sink = nullptr);

struct EpisodeRecord {
  double target = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> states;   // [T x state_dim]
  std::vector<double> actions;  // [T x action width]
  std::vector<double> rewards;  // [T]
  std::vector<double> rtg;      // [T], return-to-go before each step
  double actual_return = 0.0;

  double final_rtg() const { return target - actual_return; }
};

// Runs one episode per (target, seed) pair in lockstep.
std::vector<EpisodeRecord> rollout_batch(const Policy& policy, const EnvSpec& spec,
                                         std::span<const double> targets,
                                         std::span<const std::uint64_t> seeds);
EpisodeRecord rollout(const Model& model, const EnvSpec& spec, double target,
                      std::uint64_t seed);

// Env reset seed for one evaluation episode.
std::uint64_t episode_seed(std::uint64_t seed, std::size_t target_index,
                           std::size_t episode);

struct AlignmentRow {
  std::string variant;
  std::uint64_t seed = 0;
  std::size_t target_index = 0;
  double target = 0.0;
  std::size_t episode = 0;
  double actual = 0.0;
  double abs_err_norm = 0.0;  // 100 |actual - target| / (q95 - q05)
};

struct AlignmentReport {
  TargetGrid grid;
  std::vector<AlignmentRow> rows;
  std::vector<std::uint64_t> seeds;
  std::vector<double> seed_mean;      // per seed, over targets and episodes
  std::vector<double> target_mean;    // per target, mean of per-seed means
  std::vector<double> target_stderr;  // per target, over seeds
  double grand_mean = 0.0;            // mean of target_mean
  double grand_stderr = 0.0;          // over seed_mean
};

double normalized_error(const TargetGrid& grid, double actual, double target);
std::vector<AlignmentRow> alignment_rows(const Policy& policy, const EnvSpec& spec,
                                         const TargetGrid& grid, std::size_t n_episodes,
                                         std::uint64_t seed, const std::string& variant,
                                         std::vector<EpisodeRecord>* episodes = nullptr);
// Rows may come from several seeds; seeds are reported in ascending order.
AlignmentReport summarize_alignment(const TargetGrid& grid, std::vector<AlignmentRow> rows);
AlignmentReport alignment_eval(const Model& model, const Dataset& data,
                               std::size_t n_episodes,
                               std::span<const std::uint64_t> seeds);

std::string alignment_csv(const std::vector<AlignmentRow>& rows);
std::string alignment_json(const AlignmentReport& report);

// Fractions of first-layer attention mass from the final state query onto
// each token group, averaged over steps and episodes. DT reads block0.self;
// RADT reads block0.seqra, whose keys are all return tokens.
struct AttentionMass {
  double returns = 0.0, states = 0.0, actions = 0.0;
};
struct ProbeReport {
  std::string site;
  std::vector<double> targets;
  std::vector<AttentionMass> per_target;
  AttentionMass overall;
  // Smallest return fraction seen in any single call.
  double min_return_fraction = 1.0;
};
ProbeReport attention_probe(const Model& model, const EnvSpec& spec,
                            const TargetGrid& grid, std::size_t n_episodes,
                            std::uint64_t seed);
std::string probe_csv(const ProbeReport& report);

// Per-step mean and standard error of the return-to-go. Index T holds the
// final value target - actual.
struct RtgTrace {
  double target = 0.0;
  std::vector<double> mean, stderr_;
};
RtgTrace trace_from_episodes(double target, const std::vector<EpisodeRecord>& episodes);
std::vector<RtgTrace> rtg_trace(const Policy& policy, const EnvSpec& spec,
                                std::span<const double> targets, std::size_t n_episodes,
                                std::uint64_t seed);
std::string trace_csv(const std::vector<RtgTrace>& traces);

// Mean return at the top grid target, scaled so the env's return bounds map
// to 0 and 100.
double max_return_eval(const Policy& policy, const EnvSpec& spec, const TargetGrid& grid,
                       std::size_t n_episodes, std::uint64_t seed);

double mean(std::span<const double> v);
// Sample standard error; 0 for fewer than two values.
double standard_error(std::span<const double> v);

}  // namespace radt

#endif  // RADT_EVAL_HPP_
