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

#include "radt/envs.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace radt {
namespace {

constexpr double kQuantum = 4294967296.0;  // 2^32
constexpr double kLinewalkAccel = 0.1;
constexpr double kLinewalkJitter = 0.05;
constexpr double kLinewalkPositionScale = 40.0;

const EnvSpec kSpecs[] = {
    {EnvId::kLinewalk, "linewalk", 40, 2, ActionSpace::continuous(1, 1.0), 0.0, 1.0},
    {EnvId::kGridcollect, "gridcollect", 30, 2 + kGridSize * kGridSize,
     ActionSpace::categorical(5), 0.0, 1.0},
    {EnvId::kDelaychain, "delaychain", 30, 1, ActionSpace::categorical(2), 0.0, 29.0},
};

void check_action(const EnvSpec& spec, std::span<const double> action) {
  if (action.size() != spec.action.width())
    throw InvalidArgument(spec.name + ": action has " + std::to_string(action.size()) +
                          " components, expected " +
                          std::to_string(spec.action.width()));
  if (spec.action.discrete) {
    const double a = action[0];
    if (!(a >= 0.0 && a < static_cast<double>(spec.action.size)) || a != std::floor(a))
      throw InvalidArgument(spec.name + ": invalid action " + format_double(a));
    return;
  }
  for (double a : action)
    if (!(std::abs(a) <= spec.action.bound))
      throw InvalidArgument(spec.name + ": action " + format_double(a) +
                            " outside [-" + format_double(spec.action.bound) + ", " +
                            format_double(spec.action.bound) + "]");
}

}  // namespace

double quantize_return(double v) { return std::nearbyint(v * kQuantum) / kQuantum; }

const EnvSpec& env_spec(EnvId id) {
  for (const auto& s : kSpecs)
    if (s.id == id) return s;
  throw InvalidArgument("unknown environment id");
}

const EnvSpec& env_spec(std::string_view name) {
  for (const auto& s : kSpecs)
    if (s.name == name) return s;
  throw InvalidArgument("unknown environment '" + std::string(name) +
                        "' (expected linewalk, gridcollect or delaychain)");
}

std::vector<std::string> env_names() {
  std::vector<std::string> out;
  for (const auto& s : kSpecs) out.push_back(s.name);
  return out;
}

EnvState env_reset(const EnvSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  EnvState s;
  switch (spec.id) {
    case EnvId::kLinewalk: {
      std::uniform_real_distribution<double> jitter(-kLinewalkJitter, kLinewalkJitter);
      s.position = jitter(rng);
      break;
    }
    case EnvId::kGridcollect: {
      // Items on distinct cells, never on the start corner (0, 0).
      std::vector<std::size_t> cells(kGridSize * kGridSize - 1);
      std::iota(cells.begin(), cells.end(), 1);
      for (std::size_t i = 0; i < kGridItems; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, cells.size() - 1);
        std::swap(cells[i], cells[pick(rng)]);
      }
      s.items.assign(kGridSize * kGridSize, 0);
      for (std::size_t i = 0; i < kGridItems; ++i) s.items[cells[i]] = 1;
      break;
    }
    case EnvId::kDelaychain:
      break;
  }
  return s;
}

std::vector<double> env_observe(const EnvSpec& spec, const EnvState& s) {
  switch (spec.id) {
    case EnvId::kLinewalk:
      return {s.position / kLinewalkPositionScale, s.velocity};
    case EnvId::kGridcollect: {
      std::vector<double> obs;
      obs.reserve(spec.state_dim);
      obs.push_back(static_cast<double>(s.x) / (kGridSize - 1));
      obs.push_back(static_cast<double>(s.y) / (kGridSize - 1));
      for (auto f : s.items) obs.push_back(f);
      return obs;
    }
    case EnvId::kDelaychain:
      return {static_cast<double>(s.t) / static_cast<double>(spec.horizon)};
  }
  return {};
}

StepResult env_step(const EnvSpec& spec, const EnvState& state,
                    std::span<const double> action) {
  if (state.t >= spec.horizon)
    throw InvalidArgument(spec.name + ": episode already finished");
  check_action(spec, action);
  StepResult r;
  r.next = state;
  EnvState& s = r.next;
  switch (spec.id) {
    case EnvId::kLinewalk: {
      s.velocity = std::clamp(quantize_return(s.velocity + kLinewalkAccel * action[0]),
                              0.0, 1.0);
      s.position += s.velocity;
      r.reward = s.velocity;
      break;
    }
    case EnvId::kGridcollect: {
      static constexpr int dx[5] = {0, 0, 0, -1, 1};
      static constexpr int dy[5] = {0, -1, 1, 0, 0};
      const int a = static_cast<int>(action[0]);
      const int hi = static_cast<int>(kGridSize) - 1;
      s.x = std::clamp(s.x + dx[a], 0, hi);
      s.y = std::clamp(s.y + dy[a], 0, hi);
      auto& cell = s.items[static_cast<std::size_t>(s.y) * kGridSize + static_cast<std::size_t>(s.x)];
      if (cell) {
        cell = 0;
        r.reward = 1.0;
      }
      break;
    }
    case EnvId::kDelaychain: {
      // The press count is paid out at the final step; the final action
      // itself is not counted.
      if (s.t + 1 == spec.horizon) {
        r.reward = s.counter;
      } else if (action[0] == 1.0) {
        ++s.counter;
      }
      break;
    }
  }
  ++s.t;
  r.done = s.t == spec.horizon;
  r.observation = env_observe(spec, s);
  return r;
}

ReturnBounds return_bounds(const EnvSpec& spec) {
  switch (spec.id) {
    case EnvId::kLinewalk: {
      // Full throttle from rest: velocity 0.1 t until it saturates at 1.
      double total = 0.0, v = 0.0;
      for (std::size_t t = 0; t < spec.horizon; ++t) {
        v = std::min(1.0, quantize_return(v + kLinewalkAccel));
        total += v;
      }
      return {0.0, total};
    }
    case EnvId::kGridcollect:
      return {0.0, static_cast<double>(kGridItems)};
    case EnvId::kDelaychain:
      return {0.0, static_cast<double>(spec.horizon - 1)};
  }
  return {};
}

}  // namespace radt
