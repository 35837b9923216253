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

#include "radt/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>

#include "json.hpp"

namespace radt {

using nlohmann::json;

void annotate_rtg(Trajectory& traj) {
  const std::size_t n = traj.rewards.size();
  traj.length = n;
  traj.returns_to_go.assign(n, 0.0);
  double acc = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    acc += traj.rewards[t];
    traj.returns_to_go[t] = acc;
  }
  traj.total_return = n ? traj.returns_to_go[0] : 0.0;
}

std::size_t Dataset::total_steps() const {
  std::size_t n = 0;
  for (const auto& t : trajectories) n += t.length;
  return n;
}

std::vector<double> Dataset::returns() const {
  std::vector<double> out;
  out.reserve(trajectories.size());
  for (const auto& t : trajectories) out.push_back(t.total_return);
  return out;
}

double dataset_return_scale(const std::vector<Trajectory>& trajs) {
  double m = 0.0;
  for (const auto& t : trajs) m = std::max(m, std::abs(t.total_return));
  return m > 0.0 ? m : 1.0;
}

// ---------------------------------------------------------------------------
// Behaviour policies

std::vector<double> scripted_action(const EnvSpec& spec, const EnvState& s,
                                    double skill, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  switch (spec.id) {
    case EnvId::kLinewalk:
      return {std::clamp((skill - s.velocity) / 0.1, -1.0, 1.0)};
    case EnvId::kGridcollect: {
      if (unit(rng) >= skill) {
        std::uniform_int_distribution<int> any(0, 4);
        return {static_cast<double>(any(rng))};
      }
      int best = -1, bx = 0, by = 0;
      for (std::size_t c = 0; c < s.items.size(); ++c) {
        if (!s.items[c]) continue;
        const int cx = static_cast<int>(c % kGridSize), cy = static_cast<int>(c / kGridSize);
        const int d = std::abs(cx - s.x) + std::abs(cy - s.y);
        if (best < 0 || d < best) {
          best = d;
          bx = cx;
          by = cy;
        }
      }
      if (best < 0) return {0.0};
      if (bx != s.x) return {bx < s.x ? 3.0 : 4.0};
      return {by < s.y ? 1.0 : 2.0};
    }
    case EnvId::kDelaychain:
      return {unit(rng) < skill ? 1.0 : 0.0};
  }
  return {};
}

namespace {

std::vector<double> random_action(const EnvSpec& spec, Rng& rng) {
  if (spec.action.discrete) {
    std::uniform_int_distribution<int> pick(0, static_cast<int>(spec.action.size) - 1);
    return {static_cast<double>(pick(rng))};
  }
  std::uniform_real_distribution<double> u(-spec.action.bound, spec.action.bound);
  std::vector<double> a(spec.action.size);
  for (double& v : a) v = u(rng);
  return a;
}

}  // namespace

Trajectory run_scripted_episode(const EnvSpec& spec, double skill, double epsilon,
                                std::uint64_t seed) {
  Rng rng(seed);
  EnvState state = env_reset(spec, rng());
  Trajectory traj;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t t = 0; t < spec.horizon; ++t) {
    auto obs = env_observe(spec, state);
    traj.states.insert(traj.states.end(), obs.begin(), obs.end());
    auto action = unit(rng) < epsilon ? random_action(spec, rng)
                                      : scripted_action(spec, state, skill, rng);
    traj.actions.insert(traj.actions.end(), action.begin(), action.end());
    StepResult r = env_step(spec, state, action);
    traj.rewards.push_back(r.reward);
    state = std::move(r.next);
  }
  annotate_rtg(traj);
  return traj;
}

double return_spread(const EnvSpec& spec, const std::vector<Trajectory>& trajs) {
  if (trajs.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(
      trajs.begin(), trajs.end(),
      [](const Trajectory& a, const Trajectory& b) { return a.total_return < b.total_return; });
  const ReturnBounds b = return_bounds(spec);
  return (hi->total_return - lo->total_return) / (b.max_return - b.min_return);
}

Dataset generate_dataset(const EnvSpec& spec, const PolicyMix& mix,
                         std::size_t n_traj, std::uint64_t seed) {
  if (n_traj == 0) throw InvalidArgument("generate_dataset: n_traj must be >= 1");
  if (!(mix.skill_min <= mix.skill_max) || !(mix.epsilon >= 0.0 && mix.epsilon <= 1.0))
    throw InvalidArgument("generate_dataset: invalid policy mix");
  Dataset data;
  data.env = spec.id;
  data.policy = mix;
  data.seed = seed;
  Rng master(seed);
  std::uniform_real_distribution<double> skill(mix.skill_min, mix.skill_max);
  for (std::size_t i = 0; i < n_traj; ++i) {
    const double s = mix.skill_min == mix.skill_max ? mix.skill_min : skill(master);
    data.trajectories.push_back(run_scripted_episode(spec, s, mix.epsilon, master()));
  }
  const double spread = return_spread(spec, data.trajectories);
  if (spread < mix.min_spread)
    throw GenerationError("dataset return spread " + format_double(spread) +
                          " is below the required " + format_double(mix.min_spread) +
                          " of the " + spec.name + " return range");
  data.return_scale = dataset_return_scale(data.trajectories);
  return data;
}

// ---------------------------------------------------------------------------
// Windows

void fill_window(const Dataset& data, std::size_t traj, std::size_t end,
                 std::size_t k, Window& w, std::size_t row) {
  const EnvSpec& spec = env_spec(data.env);
  const Trajectory& tr = data.trajectories.at(traj);
  if (end >= tr.length) throw InvalidArgument("fill_window: end step past episode");
  const std::size_t sd = spec.state_dim, aw = spec.action.width();
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t slot = row * k + j;
    const std::size_t back = k - 1 - j;
    if (back > end) {
      w.pad.real[slot] = 0;
      w.rtg[slot] = 0.0;
      w.timesteps[slot] = 0;
      std::fill_n(w.states.begin() + slot * sd, sd, 0.0);
      std::fill_n(w.actions.begin() + slot * aw, aw, 0.0);
      continue;
    }
    const std::size_t t = end - back;
    w.pad.real[slot] = 1;
    w.rtg[slot] = tr.returns_to_go[t];
    w.timesteps[slot] = static_cast<int>(t);
    std::copy_n(tr.states.begin() + t * sd, sd, w.states.begin() + slot * sd);
    std::copy_n(tr.actions.begin() + t * aw, aw, w.actions.begin() + slot * aw);
  }
}

Window sample_batch(const Dataset& data, std::size_t k, std::size_t batch_size,
                    Rng& rng) {
  if (batch_size == 0) throw InvalidArgument("sample_batch: batch_size must be >= 1");
  if (data.trajectories.empty()) throw InvalidArgument("sample_batch: empty dataset");
  const EnvSpec& spec = env_spec(data.env);
  std::vector<std::size_t> offsets(data.trajectories.size() + 1, 0);
  for (std::size_t i = 0; i < data.trajectories.size(); ++i)
    offsets[i + 1] = offsets[i] + data.trajectories[i].length;
  std::uniform_int_distribution<std::size_t> pick(0, offsets.back() - 1);
  Window w = Window::empty(batch_size, k, spec.state_dim, spec.action.width());
  for (std::size_t b = 0; b < batch_size; ++b) {
    const std::size_t u = pick(rng);
    const std::size_t traj =
        static_cast<std::size_t>(std::upper_bound(offsets.begin(), offsets.end(), u) -
                                 offsets.begin()) - 1;
    fill_window(data, traj, u - offsets[traj], k, w, b);
  }
  return w;
}

// ---------------------------------------------------------------------------
// JSON Lines

namespace {

constexpr const char* kFormat = "radt-lab-dataset";
constexpr int kFormatVersion = 1;

json rows(const std::vector<double>& flat, std::size_t width, bool as_int) {
  json out = json::array();
  for (std::size_t i = 0; i < flat.size(); i += width) {
    if (as_int) {
      out.push_back(static_cast<int>(flat[i]));
      continue;
    }
    out.push_back(json(std::vector<double>(flat.begin() + i, flat.begin() + i + width)));
  }
  return out;
}

void flatten(const json& j, std::size_t width, bool as_int, std::vector<double>& out,
             const char* field, std::size_t line) {
  if (!j.is_array()) throw ParseError(std::string(field) + " must be an array", line);
  for (const auto& row : j) {
    if (as_int) {
      if (!row.is_number_integer())
        throw ParseError(std::string(field) + " entries must be integers", line);
      out.push_back(row.get<double>());
      continue;
    }
    if (!row.is_array() || row.size() != width)
      throw ParseError(std::string(field) + " rows must have " + std::to_string(width) +
                           " numbers",
                       line);
    for (const auto& v : row) {
      if (!v.is_number()) throw ParseError(std::string(field) + " must be numeric", line);
      out.push_back(v.get<double>());
    }
  }
}

}  // namespace

void write_dataset(std::ostream& out, const Dataset& data) {
  const EnvSpec& spec = env_spec(data.env);
  json meta;
  meta["format"] = kFormat;
  meta["version"] = kFormatVersion;
  meta["env"] = spec.name;
  meta["n_traj"] = data.trajectories.size();
  meta["return_scale"] = data.return_scale;
  meta["seed"] = data.seed;
  meta["policy"] = {{"skill_min", data.policy.skill_min},
                    {"skill_max", data.policy.skill_max},
                    {"epsilon", data.policy.epsilon},
                    {"min_spread", data.policy.min_spread}};
  out << meta.dump() << '\n';
  for (const auto& t : data.trajectories) {
    json rec;
    rec["states"] = rows(t.states, spec.state_dim, false);
    rec["actions"] = rows(t.actions, spec.action.width(), spec.action.discrete);
    rec["rewards"] = t.rewards;
    rec["total_return"] = t.total_return;
    out << rec.dump() << '\n';
  }
}

Dataset read_dataset(std::istream& in) {
  Dataset data;
  std::string line;
  std::size_t line_no = 0;
  const EnvSpec* spec = nullptr;
  std::size_t expected = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) throw ParseError("blank line in dataset", line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
    }
    try {
      if (spec == nullptr) {
        if (j.value("format", "") != kFormat)
          throw ParseError("first line is not a radt-lab dataset header", line_no);
        if (j.at("version").get<int>() != kFormatVersion)
          throw ParseError("unsupported dataset version", line_no);
        spec = &env_spec(j.at("env").get<std::string>());
        data.env = spec->id;
        expected = j.at("n_traj").get<std::size_t>();
        data.seed = j.at("seed").get<std::uint64_t>();
        const auto& p = j.at("policy");
        data.policy = {p.at("skill_min").get<double>(), p.at("skill_max").get<double>(),
                       p.at("epsilon").get<double>(), p.at("min_spread").get<double>()};
        data.return_scale = j.at("return_scale").get<double>();
        continue;
      }
      Trajectory t;
      flatten(j.at("states"), spec->state_dim, false, t.states, "states", line_no);
      flatten(j.at("actions"), spec->action.width(), spec->action.discrete, t.actions,
              "actions", line_no);
      for (const auto& r : j.at("rewards")) t.rewards.push_back(r.get<double>());
      const double total = j.at("total_return").get<double>();
      annotate_rtg(t);
      if (t.states.size() != t.length * spec->state_dim ||
          t.actions.size() != t.length * spec->action.width())
        throw ParseError("states, actions and rewards disagree in length", line_no);
      if (t.total_return != total)
        throw ParseError("total_return " + format_double(total) +
                             " does not equal the reward sum " +
                             format_double(t.total_return),
                         line_no);
      data.trajectories.push_back(std::move(t));
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad field: ") + e.what(), line_no);
    } catch (const InvalidArgument& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  if (data.trajectories.empty()) throw InvalidArgument("dataset is empty");
  if (data.trajectories.size() != expected)
    throw ParseError("header announces " + std::to_string(expected) +
                         " trajectories, file holds " +
                         std::to_string(data.trajectories.size()),
                     line_no + 1);
  return data;
}

void save_dataset(const std::string& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write dataset '" + path + "'");
  write_dataset(out, data);
  if (!out) throw Error("failed while writing dataset '" + path + "'");
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open dataset '" + path + "'");
  return read_dataset(in);
}

// ---------------------------------------------------------------------------
// Statistics

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw InvalidArgument("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

DatasetStats dataset_stats(const Dataset& data) {
  const EnvSpec& spec = env_spec(data.env);
  DatasetStats s;
  auto r = data.returns();
  s.n_traj = r.size();
  s.total_steps = data.total_steps();
  if (r.empty()) return s;
  s.min = *std::min_element(r.begin(), r.end());
  s.max = *std::max_element(r.begin(), r.end());
  double sum = 0.0;
  for (double v : r) sum += v;
  s.mean = sum / static_cast<double>(r.size());
  s.q05 = quantile(r, 0.05);
  s.q25 = quantile(r, 0.25);
  s.q50 = quantile(r, 0.50);
  s.q75 = quantile(r, 0.75);
  s.q95 = quantile(r, 0.95);
  s.spread = return_spread(spec, data.trajectories);
  const ReturnBounds b = return_bounds(spec);
  const std::size_t bins = 10;
  s.histogram.assign(bins, 0);
  for (std::size_t i = 0; i <= bins; ++i)
    s.bin_edges.push_back(b.min_return + (b.max_return - b.min_return) *
                                             static_cast<double>(i) / bins);
  for (double v : r) {
    auto idx = static_cast<std::size_t>((v - b.min_return) / (b.max_return - b.min_return) *
                                        static_cast<double>(bins));
    s.histogram[std::min(idx, bins - 1)]++;
  }
  return s;
}

std::string stats_json(const Dataset& data, const DatasetStats& s) {
  nlohmann::ordered_json j;
  j["env"] = env_spec(data.env).name;
  j["n_traj"] = s.n_traj;
  j["total_steps"] = s.total_steps;
  j["return_scale"] = data.return_scale;
  j["returns"] = {{"min", s.min}, {"max", s.max}, {"mean", s.mean}};
  j["quantiles"] = {{"q05", s.q05}, {"q25", s.q25}, {"q50", s.q50},
                    {"q75", s.q75}, {"q95", s.q95}};
  j["spread"] = s.spread;
  j["histogram"] = {{"edges", s.bin_edges}, {"counts", s.histogram}};
  return j.dump(2) + "\n";
}

}  // namespace radt
