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
#include <cmath>

#include "doctest.h"
#include "radt/eval.hpp"
#include "radt/svg.hpp"
#include "test_support.hpp"

using namespace radt;

namespace {

RadtConfig env_config(const EnvSpec& spec, Variant v) {
  RadtConfig c;
  c.variant = v;
  c.n_layers = 2;
  c.n_heads = 2;
  c.d_model = 16;
  c.context_length = 4;
  c.max_timesteps = 40;
  c.dropout = 0.0;
  c.state_dim = spec.state_dim;
  c.action = spec.action;
  return c;
}

// Presses while the timestep is below the requested return-to-go.
Policy delaychain_oracle() {
  return {3, [](const Window& w) {
            std::vector<double> out;
            for (std::size_t b = 0; b < w.batch; ++b) {
              const std::size_t last = b * w.k + w.k - 1;
              out.push_back(w.timesteps[last] < w.rtg[last] ? 1.0 : 0.0);
            }
            return out;
          }};
}

Policy constant_policy(double a) {
  return {1, [a](const Window& w) { return std::vector<double>(w.batch, a); }};
}

}  // namespace

TEST_CASE("target grid arithmetic") {
  TargetGrid g = target_grid(0.0, 60.0);
  CHECK(g.targets == std::vector<double>{0, 10, 20, 30, 40, 50, 60});
  const double expect[] = {0, 16.6667, 33.3333, 50, 66.6667, 83.3333, 100};
  for (std::size_t i = 0; i < 7; ++i)
    CHECK(g.normalized(g.targets[i]) == doctest::Approx(expect[i]).epsilon(1e-5));
  CHECK_THROWS_AS(target_grid(5.0, 5.0), InvalidArgument);
}

TEST_CASE("target grid from empirical quantiles") {
  Dataset d = generate_dataset(env_spec("linewalk"), PolicyMix{}, 200, 1);
  std::vector<double> r = d.returns();
  std::sort(r.begin(), r.end());
  // Linear interpolation at h = (n - 1) q.
  auto q = [&](double p) {
    const double h = (static_cast<double>(r.size()) - 1) * p;
    const std::size_t lo = static_cast<std::size_t>(h);
    return r[lo] + (h - static_cast<double>(lo)) * (r[lo + 1] - r[lo]);
  };
  TargetGrid g = build_target_grid(d);
  CHECK(g.q05 == doctest::Approx(q(0.05)).epsilon(1e-15));
  CHECK(g.q95 == doctest::Approx(q(0.95)).epsilon(1e-15));
  REQUIRE(g.targets.size() == 7);
  for (std::size_t i = 0; i < 7; ++i) {
    CHECK(std::abs(g.targets[i] - (g.q05 + i * (g.q95 - g.q05) / 6)) <= 1e-9);
    CHECK(g.targets[i] == quantize_return(g.targets[i]));
    if (i) CHECK(g.targets[i] > g.targets[i - 1]);
  }
  PolicyMix mix;
  mix.min_spread = 0.0;
  CHECK_THROWS_AS(build_target_grid(generate_dataset(env_spec("linewalk"), mix, 19, 1)),
                  InvalidArgument);
}

TEST_CASE("rollout bookkeeping is exact for an untrained model") {
  const EnvSpec& spec = env_spec("linewalk");
  for (Variant v : {Variant::kRadt, Variant::kDt}) {
    Model m(env_config(spec, v), 7);
    for (double target : {quantize_return(12.3), 30.0, -4.0}) {
      EpisodeRecord a = rollout(m, spec, target, 11), b = rollout(m, spec, target, 11);
      CHECK(a.rewards == b.rewards);
      CHECK(a.actions == b.actions);
      REQUIRE(a.rtg.size() == spec.horizon);
      CHECK(a.rtg[0] == target);
      double received = 0.0;
      for (std::size_t t = 0; t < spec.horizon; ++t) {
        CHECK(a.rtg[t] == target - received);
        if (t + 1 < spec.horizon) CHECK(a.rtg[t] - a.rtg[t + 1] == a.rewards[t]);
        received += a.rewards[t];
      }
      CHECK(a.actual_return == received);
      CHECK(a.final_rtg() == target - a.actual_return);
      CHECK(a.rtg.back() - a.final_rtg() == a.rewards.back());
    }
  }
}

TEST_CASE("rollout windows are left-padded and hide the current action") {
  const EnvSpec& spec = env_spec("linewalk");
  std::size_t t = 0;
  Policy probe{4, [&](const Window& w) {
                 CHECK(w.k == 4);
                 for (std::size_t j = 0; j < 4; ++j) {
                   const bool real = j + t >= 3;
                   CHECK(w.pad.real[j] == (real ? 1 : 0));
                   if (real) CHECK(w.timesteps[j] == static_cast<int>(t + j) - 3);
                 }
                 CHECK(w.actions[3] == 0.0);
                 if (t > 0) CHECK(w.actions[2] == 0.5);
                 ++t;
                 return std::vector<double>{0.5};
               }};
  const double target[] = {10.0};
  const std::uint64_t seed[] = {1};
  rollout_batch(probe, spec, target, seed);
  CHECK(t == spec.horizon);
}

TEST_CASE("model and env must agree") {
  Model m(env_config(env_spec("linewalk"), Variant::kRadt), 1);
  CHECK_THROWS_AS(rollout(m, env_spec("delaychain"), 3.0, 1), InvalidArgument);
}

TEST_CASE("an exact oracle scores zero alignment error") {
  const EnvSpec& spec = env_spec("delaychain");
  TargetGrid g = target_grid(0.0, 24.0);
  std::vector<AlignmentRow> rows;
  for (std::uint64_t s : {1, 2, 3}) {
    auto part = alignment_rows(delaychain_oracle(), spec, g, 2, s, "oracle");
    rows.insert(rows.end(), part.begin(), part.end());
  }
  AlignmentReport r = summarize_alignment(g, rows);
  CHECK(r.rows.size() == 42);
  CHECK(r.grand_mean == 0.0);
  for (double e : r.target_mean) CHECK(e == 0.0);
  auto traces = rtg_trace(delaychain_oracle(), spec, g.targets, 3, 5);
  for (const auto& tr : traces) {
    CHECK(tr.mean.front() == tr.target);
    CHECK(tr.stderr_.front() == 0.0);
    CHECK(tr.mean.back() == 0.0);
  }
}

TEST_CASE("alignment report arithmetic") {
  TargetGrid g = target_grid(0.0, 60.0);
  CHECK(normalized_error(g, 16.0, 10.0) == 10.0);
  std::vector<AlignmentRow> rows;
  Rng rng(3);
  std::uniform_real_distribution<double> u(0.0, 50.0);
  for (std::uint64_t seed : {1, 2, 3})
    for (std::size_t i = 0; i < 7; ++i)
      for (std::size_t e = 0; e < 2; ++e) {
        const double actual = u(rng);
        rows.push_back({"x", seed, i, g.targets[i], e, actual,
                        normalized_error(g, actual, g.targets[i])});
      }
  AlignmentReport r = summarize_alignment(g, rows);
  CHECK(r.seeds == std::vector<std::uint64_t>{1, 2, 3});
  double m = 0.0;
  for (double x : r.target_mean) m += x / 7.0;
  CHECK(r.grand_mean == doctest::Approx(m).epsilon(1e-14));
  for (double s : r.target_stderr) CHECK(s > 0.0);
  // Per-target mean over seeds, each seed averaging its two episodes.
  double t0 = 0.0;
  for (const auto& row : rows)
    if (row.target_index == 0) t0 += row.abs_err_norm / 6.0;
  CHECK(r.target_mean[0] == doctest::Approx(t0).epsilon(1e-14));
  const std::string csv = alignment_csv(rows);
  CHECK(csv.rfind("variant,seed,target,episode,actual,abs_err_norm\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 43);
  CHECK(alignment_json(r) == alignment_json(summarize_alignment(g, rows)));
  CHECK_THROWS_AS(summarize_alignment(g, {}), InvalidArgument);
  CHECK(standard_error(std::vector<double>{1.0}) == 0.0);
  CHECK(standard_error(std::vector<double>{1.0, 3.0}) == doctest::Approx(1.0));
}

TEST_CASE("rtg trace deltas equal negated mean rewards") {
  const EnvSpec& spec = env_spec("linewalk");
  Model m(env_config(spec, Variant::kDt), 2);
  const double targets[] = {5.0, 20.0};
  Policy p = greedy_policy(m, spec);
  auto traces = rtg_trace(p, spec, targets, 4, 9);
  std::vector<double> tt;
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t e = 0; e < 4; ++e) {
      tt.push_back(targets[i]);
      seeds.push_back(episode_seed(9, i, e));
    }
  auto eps = rollout_batch(p, spec, tt, seeds);
  for (std::size_t i = 0; i < 2; ++i) {
    const auto& tr = traces[i];
    REQUIRE(tr.mean.size() == spec.horizon + 1);
    CHECK(tr.mean[0] == targets[i]);
    for (std::size_t t = 0; t < spec.horizon; ++t) {
      double r = 0.0;
      for (std::size_t e = 0; e < 4; ++e) r += eps[i * 4 + e].rewards[t] / 4.0;
      CHECK(tr.mean[t + 1] - tr.mean[t] == doctest::Approx(-r).epsilon(1e-12));
    }
  }
  const std::string csv = trace_csv(traces);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 2 * 41);
}

TEST_CASE("max-return normalization") {
  const EnvSpec& spec = env_spec("linewalk");
  TargetGrid g = target_grid(0.0, 30.0);
  CHECK(max_return_eval(constant_policy(1.0), spec, g, 3, 1) == 100.0);
  CHECK(max_return_eval(constant_policy(0.0), spec, g, 3, 1) == 0.0);
}

TEST_CASE("attention probe") {
  const EnvSpec& spec = env_spec("linewalk");
  TargetGrid g = target_grid(0.0, 30.0);
  {
    Model m(env_config(spec, Variant::kRadt), 3);
    Rng rng(1);
    std::normal_distribution<double> n(0.0, 0.3);
    for (const auto& [name, t] : m.parameters().entries()) {
      Tensor p = t;
      for (double& v : p.mutable_data()) v = n(rng);
    }
    ProbeReport r = attention_probe(m, spec, g, 2, 1);
    CHECK(r.site == "block0.seqra");
    CHECK(r.min_return_fraction == 1.0);
    for (const auto& pt : r.per_target) {
      CHECK(pt.returns == 1.0);
      CHECK(pt.states == 0.0);
      CHECK(pt.actions == 0.0);
    }
    const std::string csv = probe_csv(r);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 8);
  }
  {
    Model m(env_config(spec, Variant::kDt), 3);
    ProbeReport r = attention_probe(m, spec, g, 2, 1);
    CHECK(r.site == "block0.self");
    for (const auto& pt : r.per_target) {
      CHECK(std::abs(pt.returns + pt.states + pt.actions - 1.0) < 1e-9);
      CHECK(pt.returns > 0.0);
      CHECK(pt.states > 0.0);
    }
  }
  RadtConfig c = env_config(spec, Variant::kRadt);
  c.use_seqra = false;
  Model plain(c, 1);
  CHECK_THROWS_AS(attention_probe(plain, spec, g, 1, 1), InvalidArgument);
}

TEST_CASE("svg output is deterministic and balanced") {
  Chart c{"rtg & traces", "step", "rtg", {}};
  c.series.push_back({"a<b>", {0, 1, 2}, {3, 2, 1}, {0.1, 0.2, 0.3}});
  c.series.push_back({"flat", {0, 1}, {1, 1}, {}});
  const std::string s = svg_line_chart(c);
  CHECK(s == svg_line_chart(c));
  CHECK(s.rfind("<?xml", 0) == 0);
  CHECK(s.find("&amp;") != std::string::npos);
  CHECK(s.find("a&lt;b&gt;") != std::string::npos);
  auto count = [&](const std::string& needle) {
    std::size_t n = 0;
    for (std::size_t p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
    return n;
  };
  CHECK(count("<svg") == 1);
  CHECK(count("</svg>") == 1);
  CHECK(count("<g ") == count("</g>"));
  CHECK(count("<text") == count("</text>"));
  CHECK(s.find("nan") == std::string::npos);
  const std::string stack = svg_stack({c, c});
  CHECK(stack.find("translate(0,400.00)") != std::string::npos);
}
