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


#include "radt/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "json.hpp"

namespace radt {

// ---------------------------------------------------------------------------
// Target grid

double TargetGrid::normalized(double value) const {
  return 100.0 * (value - q05) / spread();
}

TargetGrid target_grid(double q05, double q95) {
  if (!(q05 < q95))
    throw InvalidArgument("degenerate return spread: q05 " + format_double(q05) +
                          " is not below q95 " + format_double(q95));
  TargetGrid g;
  g.q05 = q05;
  g.q95 = q95;
  const double step = (q95 - q05) / static_cast<double>(kGridPoints - 1);
  for (std::size_t i = 0; i < kGridPoints; ++i)
    g.targets.push_back(
        quantize_return(i + 1 == kGridPoints ? q95 : q05 + static_cast<double>(i) * step));
  return g;
}

TargetGrid build_target_grid(const Dataset& data) {
  if (data.trajectories.size() < 20)
    throw InvalidArgument("target grid needs at least 20 trajectories, dataset has " +
                          std::to_string(data.trajectories.size()));
  const auto r = data.returns();
  return target_grid(quantile(r, 0.05), quantile(r, 0.95));
}

// ---------------------------------------------------------------------------
// Rollouts

Policy greedy_policy(const Model& model, const EnvSpec& spec, AttentionSink* sink) {
  const RadtConfig& c = model.config();
  if (c.state_dim != spec.state_dim || !(c.action == spec.action))
    throw InvalidArgument("model does not match the state and action spaces of '" +
                          spec.name + "'");
  if (c.max_timesteps < spec.horizon)
    throw InvalidArgument("model max_timesteps is below the " + spec.name + " horizon");
  Policy p;
  p.context_length = c.context_length;
  p.act = [&model, sink](const Window& w) {
    ForwardOptions fo;
    fo.sink = sink;
    Tensor pred = model.forward(w, fo);
    const auto& a = model.config().action;
    const std::size_t width = a.size, k = w.k;
    auto data = pred.data();
    std::vector<double> out;
    out.reserve(w.batch * a.width());
    for (std::size_t b = 0; b < w.batch; ++b) {
      const double* row = data.data() + (b * k + k - 1) * width;
      if (a.discrete) {
        out.push_back(static_cast<double>(std::max_element(row, row + width) - row));
      } else {
        out.insert(out.end(), row, row + width);
      }
    }
    return out;
  };
  return p;
}

std::vector<EpisodeRecord> rollout_batch(const Policy& policy, const EnvSpec& spec,
                                         std::span<const double> targets,
                                         std::span<const std::uint64_t> seeds) {
  if (targets.size() != seeds.size())
    throw InvalidArgument("rollout_batch: targets and seeds differ in length");
  const std::size_t n = targets.size(), k = policy.context_length;
  const std::size_t sd = spec.state_dim, aw = spec.action.width(), horizon = spec.horizon;
  std::vector<EpisodeRecord> eps(n);
  std::vector<EnvState> env(n);
  std::vector<double> received(n, 0.0);
  for (std::size_t b = 0; b < n; ++b) {
    eps[b].target = targets[b];
    eps[b].seed = seeds[b];
    env[b] = env_reset(spec, seeds[b]);
  }
  if (n == 0) return eps;
  for (std::size_t t = 0; t < horizon; ++t) {
    for (std::size_t b = 0; b < n; ++b) {
      auto obs = env_observe(spec, env[b]);
      eps[b].states.insert(eps[b].states.end(), obs.begin(), obs.end());
      eps[b].rtg.push_back(eps[b].target - received[b]);
    }
    Window w = Window::empty(n, k, sd, aw);
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t j = 0; j < k; ++j) {
        const std::size_t back = k - 1 - j, slot = b * k + j;
        if (back > t) continue;
        const std::size_t s = t - back;
        w.pad.real[slot] = 1;
        w.rtg[slot] = eps[b].rtg[s];
        w.timesteps[slot] = static_cast<int>(s);
        std::copy_n(eps[b].states.begin() + s * sd, sd, w.states.begin() + slot * sd);
        if (s < t)
          std::copy_n(eps[b].actions.begin() + s * aw, aw, w.actions.begin() + slot * aw);
      }
    const std::vector<double> act = policy.act(w);
    if (act.size() != n * aw)
      throw DimensionError("policy returned " + std::to_string(act.size()) +
                           " action values, expected " + std::to_string(n * aw));
    for (std::size_t b = 0; b < n; ++b) {
      std::span<const double> a(act.data() + b * aw, aw);
      StepResult r = env_step(spec, env[b], a);
      eps[b].actions.insert(eps[b].actions.end(), a.begin(), a.end());
      eps[b].rewards.push_back(r.reward);
      received[b] += r.reward;
      env[b] = std::move(r.next);
    }
  }
  for (std::size_t b = 0; b < n; ++b) eps[b].actual_return = received[b];
  return eps;
}

EpisodeRecord rollout(const Model& model, const EnvSpec& spec, double target,
                      std::uint64_t seed) {
  const double t[] = {target};
  const std::uint64_t s[] = {seed};
  return rollout_batch(greedy_policy(model, spec), spec, t, s).front();
}

std::uint64_t episode_seed(std::uint64_t seed, std::size_t target_index,
                           std::size_t episode) {
  // SplitMix64 finalizer over a packed key.
  std::uint64_t z = seed * 0x9e3779b97f4a7c15ull + (target_index << 32) + episode + 1;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// ---------------------------------------------------------------------------
// Alignment

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double standard_error(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  const double n = static_cast<double>(v.size());
  return std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
}

double normalized_error(const TargetGrid& grid, double actual, double target) {
  return 100.0 * std::abs(actual - target) / grid.spread();
}

std::vector<AlignmentRow> alignment_rows(const Policy& policy, const EnvSpec& spec,
                                         const TargetGrid& grid, std::size_t n_episodes,
                                         std::uint64_t seed, const std::string& variant,
                                         std::vector<EpisodeRecord>* episodes) {
  if (n_episodes == 0) throw InvalidArgument("alignment eval needs n_episodes >= 1");
  std::vector<double> targets;
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < grid.targets.size(); ++i)
    for (std::size_t e = 0; e < n_episodes; ++e) {
      targets.push_back(grid.targets[i]);
      seeds.push_back(episode_seed(seed, i, e));
    }
  auto eps = rollout_batch(policy, spec, targets, seeds);
  std::vector<AlignmentRow> rows;
  for (std::size_t i = 0; i < grid.targets.size(); ++i)
    for (std::size_t e = 0; e < n_episodes; ++e) {
      const auto& ep = eps[i * n_episodes + e];
      rows.push_back({variant, seed, i, ep.target, e, ep.actual_return,
                      normalized_error(grid, ep.actual_return, ep.target)});
    }
  if (episodes) *episodes = std::move(eps);
  return rows;
}

AlignmentReport summarize_alignment(const TargetGrid& grid, std::vector<AlignmentRow> rows) {
  if (rows.empty()) throw InvalidArgument("no alignment rows to summarize");
  AlignmentReport r;
  r.grid = grid;
  const std::size_t nt = grid.targets.size();
  // seed -> per-target error lists
  std::map<std::uint64_t, std::vector<std::vector<double>>> by_seed;
  for (const auto& row : rows) {
    if (row.target_index >= nt) throw InvalidArgument("alignment row target index out of range");
    auto& slot = by_seed[row.seed];
    slot.resize(nt);
    slot[row.target_index].push_back(row.abs_err_norm);
  }
  std::vector<std::vector<double>> per_target(nt);
  for (const auto& [seed, lists] : by_seed) {
    r.seeds.push_back(seed);
    std::vector<double> all;
    for (std::size_t i = 0; i < nt; ++i) {
      if (lists[i].empty())
        throw InvalidArgument("seed " + std::to_string(seed) + " has no episodes at target " +
                              std::to_string(i));
      per_target[i].push_back(mean(lists[i]));
      all.insert(all.end(), lists[i].begin(), lists[i].end());
    }
    r.seed_mean.push_back(mean(all));
  }
  for (std::size_t i = 0; i < nt; ++i) {
    r.target_mean.push_back(mean(per_target[i]));
    r.target_stderr.push_back(standard_error(per_target[i]));
  }
  r.grand_mean = mean(r.target_mean);
  r.grand_stderr = standard_error(r.seed_mean);
  r.rows = std::move(rows);
  return r;
}

AlignmentReport alignment_eval(const Model& model, const Dataset& data,
                               std::size_t n_episodes,
                               std::span<const std::uint64_t> seeds) {
  const EnvSpec& spec = env_spec(data.env);
  const TargetGrid grid = build_target_grid(data);
  const Policy policy = greedy_policy(model, spec);
  std::vector<AlignmentRow> rows;
  for (std::uint64_t s : seeds) {
    auto part = alignment_rows(policy, spec, grid, n_episodes, s,
                               std::string(variant_name(model.config().variant)));
    rows.insert(rows.end(), part.begin(), part.end());
  }
  return summarize_alignment(grid, std::move(rows));
}

std::string alignment_csv(const std::vector<AlignmentRow>& rows) {
  std::string out = "variant,seed,target,episode,actual,abs_err_norm\n";
  for (const auto& r : rows)
    out += r.variant + "," + std::to_string(r.seed) + "," + format_double(r.target) + "," +
           std::to_string(r.episode) + "," + format_double(r.actual) + "," +
           format_double(r.abs_err_norm) + "\n";
  return out;
}

std::string alignment_json(const AlignmentReport& r) {
  nlohmann::ordered_json j;
  j["q05"] = r.grid.q05;
  j["q95"] = r.grid.q95;
  j["seeds"] = r.seeds;
  auto targets = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < r.grid.targets.size(); ++i) {
    nlohmann::ordered_json t;
    t["target"] = r.grid.targets[i];
    t["normalized_target"] = r.grid.normalized(r.grid.targets[i]);
    t["mean_abs_err_norm"] = r.target_mean[i];
    t["stderr"] = r.target_stderr[i];
    targets.push_back(t);
  }
  j["targets"] = targets;
  j["seed_mean"] = r.seed_mean;
  j["grand_mean"] = r.grand_mean;
  j["grand_stderr"] = r.grand_stderr;
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Attention probe

ProbeReport attention_probe(const Model& model, const EnvSpec& spec,
                            const TargetGrid& grid, std::size_t n_episodes,
                            std::uint64_t seed) {
  const RadtConfig& c = model.config();
  const bool dt = c.variant == Variant::kDt;
  if (!dt && !c.use_seqra)
    throw InvalidArgument("attention probe reads SeqRA scores; this RADT has no SeqRA");
  if (n_episodes == 0) throw InvalidArgument("attention probe needs n_episodes >= 1");
  ProbeReport rep;
  rep.site = dt ? "block0.self" : "block0.seqra";
  rep.targets = grid.targets;
  const std::size_t k = c.context_length;
  const std::size_t query = dt ? 3 * (k - 1) + 1 : 2 * (k - 1);

  std::vector<double> targets;
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < grid.targets.size(); ++i)
    for (std::size_t e = 0; e < n_episodes; ++e) {
      targets.push_back(grid.targets[i]);
      seeds.push_back(episode_seed(seed, i, e));
    }
  const std::size_t n = targets.size();
  std::vector<AttentionMass> sums(n);
  std::size_t steps = 0;

  AttentionSink sink;
  const Policy base = greedy_policy(model, spec, &sink);
  Policy probing{base.context_length, [&](const Window& w) {
                   sink.clear();
                   auto act = base.act(w);
                   const AttentionCapture* cap = sink.find(rep.site);
                   if (cap == nullptr) throw Error("no attention capture at " + rep.site);
                   for (std::size_t b = 0; b < w.batch; ++b) {
                     AttentionMass m;
                     for (std::size_t h = 0; h < cap->heads; ++h)
                       for (std::size_t key = 0; key < cap->keys; ++key) {
                         const double p = cap->at(b, h, query, key);
                         if (!dt || key % 3 == 0) m.returns += p;
                         else if (key % 3 == 1) m.states += p;
                         else m.actions += p;
                       }
                     const double total = m.returns + m.states + m.actions;
                     const double fr = m.returns / total;
                     rep.min_return_fraction = std::min(rep.min_return_fraction, fr);
                     sums[b].returns += fr;
                     sums[b].states += m.states / total;
                     sums[b].actions += m.actions / total;
                   }
                   ++steps;
                   return act;
                 }};
  rollout_batch(probing, spec, targets, seeds);

  const double denom = static_cast<double>(steps * n_episodes);
  for (std::size_t i = 0; i < grid.targets.size(); ++i) {
    AttentionMass m;
    for (std::size_t e = 0; e < n_episodes; ++e) {
      const auto& s = sums[i * n_episodes + e];
      m.returns += s.returns;
      m.states += s.states;
      m.actions += s.actions;
    }
    m.returns /= denom;
    m.states /= denom;
    m.actions /= denom;
    rep.per_target.push_back(m);
    rep.overall.returns += m.returns;
    rep.overall.states += m.states;
    rep.overall.actions += m.actions;
  }
  const double n_targets = static_cast<double>(grid.targets.size());
  rep.overall.returns /= n_targets;
  rep.overall.states /= n_targets;
  rep.overall.actions /= n_targets;
  return rep;
}

std::string probe_csv(const ProbeReport& r) {
  std::string out = "site,target,return_mass,state_mass,action_mass\n";
  for (std::size_t i = 0; i < r.targets.size(); ++i)
    out += r.site + "," + format_double(r.targets[i]) + "," +
           format_double(r.per_target[i].returns) + "," +
           format_double(r.per_target[i].states) + "," +
           format_double(r.per_target[i].actions) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Return-to-go traces

RtgTrace trace_from_episodes(double target, const std::vector<EpisodeRecord>& episodes) {
  RtgTrace tr;
  tr.target = target;
  if (episodes.empty()) return tr;
  const std::size_t horizon = episodes.front().rtg.size();
  for (std::size_t t = 0; t <= horizon; ++t) {
    std::vector<double> v;
    for (const auto& e : episodes) v.push_back(t < horizon ? e.rtg[t] : e.final_rtg());
    tr.mean.push_back(mean(v));
    tr.stderr_.push_back(standard_error(v));
  }
  return tr;
}

std::vector<RtgTrace> rtg_trace(const Policy& policy, const EnvSpec& spec,
                                std::span<const double> targets, std::size_t n_episodes,
                                std::uint64_t seed) {
  std::vector<double> all_targets;
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < targets.size(); ++i)
    for (std::size_t e = 0; e < n_episodes; ++e) {
      all_targets.push_back(targets[i]);
      seeds.push_back(episode_seed(seed, i, e));
    }
  auto eps = rollout_batch(policy, spec, all_targets, seeds);
  std::vector<RtgTrace> out;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    std::vector<EpisodeRecord> group(eps.begin() + i * n_episodes,
                                     eps.begin() + (i + 1) * n_episodes);
    out.push_back(trace_from_episodes(targets[i], group));
  }
  return out;
}

std::string trace_csv(const std::vector<RtgTrace>& traces) {
  std::string out = "target,step,rtg_mean,rtg_stderr\n";
  for (const auto& tr : traces)
    for (std::size_t t = 0; t < tr.mean.size(); ++t)
      out += format_double(tr.target) + "," + std::to_string(t) + "," +
             format_double(tr.mean[t]) + "," + format_double(tr.stderr_[t]) + "\n";
  return out;
}

double max_return_eval(const Policy& policy, const EnvSpec& spec, const TargetGrid& grid,
                       std::size_t n_episodes, std::uint64_t seed) {
  if (n_episodes == 0) throw InvalidArgument("max-return eval needs n_episodes >= 1");
  const double top = grid.targets.back();
  std::vector<double> targets(n_episodes, top);
  std::vector<std::uint64_t> seeds;
  for (std::size_t e = 0; e < n_episodes; ++e)
    seeds.push_back(episode_seed(seed, grid.targets.size() - 1, e));
  auto eps = rollout_batch(policy, spec, targets, seeds);
  const ReturnBounds b = return_bounds(spec);
  std::vector<double> scores;
  for (const auto& e : eps)
    scores.push_back(100.0 * (e.actual_return - b.min_return) / (b.max_return - b.min_return));
  return mean(scores);
}

}  // namespace radt
