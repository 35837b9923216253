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

#ifndef RADT_DATA_HPP_
#define RADT_DATA_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "radt/envs.hpp"
#include "radt/model.hpp"

namespace radt {

// One episode. Per-step arrays are flat, row-major.
struct Trajectory {
  std::size_t length = 0;
  std::vector<double> states;         // [T x state_dim], state before each action
  std::vector<double> actions;        // [T x action width]
  std::vector<double> rewards;        // [T]
  std::vector<double> returns_to_go;  // [T]
  double total_return = 0.0;

  bool operator==(const Trajectory&) const = default;
};

// Fills returns_to_go with suffix sums of the rewards and sets total_return
// to returns_to_go[0].
void annotate_rtg(Trajectory& traj);

// Scripted behaviour policies. A skill level is drawn per episode, uniformly
// in [skill_min, skill_max]; with probability `epsilon` each step takes a
// uniformly random action instead.
//   linewalk     skill = cruising speed of a speed-tracking controller
//   gridcollect  skill = probability of a greedy move towards the nearest item
//   delaychain   skill = press probability
struct PolicyMix {
  double skill_min = 0.0;
  double skill_max = 1.0;
  double epsilon = 0.1;
  // Required return spread as a fraction of the env's return range; 0 skips
  // the check.
  double min_spread = 0.6;

  bool operator==(const PolicyMix&) const = default;
};

struct Dataset {
  EnvId env = EnvId::kLinewalk;
  std::vector<Trajectory> trajectories;
  double return_scale = 1.0;
  PolicyMix policy;
  std::uint64_t seed = 0;

  std::size_t total_steps() const;
  std::vector<double> returns() const;
  bool operator==(const Dataset&) const = default;
};

// Largest |trajectory return| in the dataset, or 1 when all returns are 0.
double dataset_return_scale(const std::vector<Trajectory>& trajs);

// Acts on observations; `skill` is the per-episode draw.
std::vector<double> scripted_action(const EnvSpec& spec, const EnvState& state,
                                    double skill, Rng& rng);

Trajectory run_scripted_episode(const EnvSpec& spec, double skill, double epsilon,
                                std::uint64_t seed);

Dataset generate_dataset(const EnvSpec& spec, const PolicyMix& mix,
                         std::size_t n_traj, std::uint64_t seed);

// Fraction of [min_return, max_return] covered by the dataset's returns.
double return_spread(const EnvSpec& spec, const std::vector<Trajectory>& trajs);

// Uniform over (trajectory, end step) pairs; left-padded K-step windows.
Window sample_batch(const Dataset& data, std::size_t k, std::size_t batch_size,
                    Rng& rng);
// The window of `k` steps ending at `end` (inclusive) of one trajectory.
void fill_window(const Dataset& data, std::size_t traj, std::size_t end,
                 std::size_t k, Window& w, std::size_t row);

// JSON Lines: a metadata record, then one record per trajectory.
void write_dataset(std::ostream& out, const Dataset& data);
Dataset read_dataset(std::istream& in);
void save_dataset(const std::string& path, const Dataset& data);
Dataset load_dataset(const std::string& path);

struct DatasetStats {
  std::size_t n_traj = 0;
  std::size_t total_steps = 0;
  double min = 0.0, max = 0.0, mean = 0.0;
  double q05 = 0.0, q25 = 0.0, q50 = 0.0, q75 = 0.0, q95 = 0.0;
  double spread = 0.0;
  std::vector<double> bin_edges;        // 11 edges over the env's return range
  std::vector<std::size_t> histogram;  // 10 bins
};

// Linear-interpolation quantile of a sample (sorted internally).
double quantile(std::vector<double> values, double q);
DatasetStats dataset_stats(const Dataset& data);
std::string stats_json(const Dataset& data, const DatasetStats& stats);

}  // namespace radt

#endif  // RADT_DATA_HPP_
