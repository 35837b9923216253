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

// Toy finite-horizon environments with deterministic dynamics and seeded
// start states.
//
//   linewalk     continuous accelerate/brake on a line; reward = velocity
//   gridcollect  6x6 grid, 5 moves, +1 per collected item (12 items)
//   delaychain   press/skip; the only reward is the press count, paid at the
//                final step

#ifndef RADT_ENVS_HPP_
#define RADT_ENVS_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "radt/model.hpp"

namespace radt {

enum class EnvId { kLinewalk, kGridcollect, kDelaychain };

struct EnvSpec {
  EnvId id = EnvId::kLinewalk;
  std::string name;
  std::size_t horizon = 0;
  std::size_t state_dim = 0;
  ActionSpace action;
  double reward_min = 0.0;
  double reward_max = 0.0;
};

const EnvSpec& env_spec(EnvId id);
// Accepts "linewalk", "gridcollect", "delaychain".
const EnvSpec& env_spec(std::string_view name);
std::vector<std::string> env_names();

inline constexpr std::size_t kGridSize = 6;
inline constexpr std::size_t kGridItems = 12;

// Full simulator state. `t` counts steps already taken.
struct EnvState {
  std::size_t t = 0;
  double position = 0.0, velocity = 0.0;  // linewalk
  int x = 0, y = 0;                       // gridcollect
  std::vector<std::uint8_t> items;        // gridcollect, kGridSize^2 flags
  int counter = 0;                        // delaychain
};

struct StepResult {
  EnvState next;
  std::vector<double> observation;
  double reward = 0.0;
  bool done = false;
};

EnvState env_reset(const EnvSpec& spec, std::uint64_t seed);
std::vector<double> env_observe(const EnvSpec& spec, const EnvState& state);
// `action` holds the continuous action vector, or one class index.
StepResult env_step(const EnvSpec& spec, const EnvState& state,
                    std::span<const double> action);

struct ReturnBounds {
  double min_return = 0.0;
  double max_return = 0.0;
};
ReturnBounds return_bounds(const EnvSpec& spec);

// Linewalk velocities and rewards live on a 2^-32 grid so that every partial
// sum of rewards within an episode is exact in double precision.
double quantize_return(double v);

}  // namespace radt

#endif  // RADT_ENVS_HPP_
