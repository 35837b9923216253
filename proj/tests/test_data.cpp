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
#include <sstream>

#include "doctest.h"
#include "radt/data.hpp"
#include "test_support.hpp"

using namespace radt;

namespace {

Trajectory from_rewards(std::vector<double> rewards) {
  Trajectory t;
  t.rewards = std::move(rewards);
  annotate_rtg(t);
  return t;
}

Dataset small_linewalk(std::size_t n = 12, std::uint64_t seed = 3) {
  PolicyMix mix;
  mix.min_spread = 0.0;
  return generate_dataset(env_spec("linewalk"), mix, n, seed);
}

std::string serialized(const Dataset& d) {
  std::ostringstream out;
  write_dataset(out, d);
  return out.str();
}

}  // namespace

TEST_CASE("annotate_rtg suffix sums") {
  CHECK(from_rewards({1, 1, 1}).returns_to_go == std::vector<double>{3, 2, 1});
  CHECK(from_rewards({0, 0, 0}).returns_to_go == std::vector<double>{0, 0, 0});
  auto t = from_rewards({0.5, -0.25, 2});
  CHECK(t.returns_to_go == std::vector<double>{2.25, 1.75, 2});
  CHECK(t.total_return == 2.25);
  CHECK(t.length == 3);
}

TEST_CASE("return-to-go bookkeeping is bit-exact on generated data") {
  for (const auto& n : env_names()) {
    PolicyMix mix;
    mix.min_spread = 0.0;
    Dataset d = generate_dataset(env_spec(n), mix, 40, 17);
    for (const auto& tr : d.trajectories) {
      REQUIRE(tr.length == env_spec(n).horizon);
      CHECK(tr.returns_to_go[0] == tr.total_return);
      CHECK(tr.returns_to_go[tr.length - 1] == tr.rewards[tr.length - 1]);
      for (std::size_t t = 1; t < tr.length; ++t)
        CHECK(tr.returns_to_go[t] == tr.returns_to_go[t - 1] - tr.rewards[t - 1]);
      double fwd = 0.0;
      for (double r : tr.rewards) fwd += r;
      CHECK(fwd == tr.total_return);
    }
  }
}

TEST_CASE("generate_dataset edge policies") {
  const EnvSpec& lw = env_spec("linewalk");
  PolicyMix max_mix{1.0, 1.0, 0.0, 0.0};
  Dataset best = generate_dataset(lw, max_mix, 1, 5);
  CHECK(best.trajectories[0].total_return == return_bounds(lw).max_return);
  PolicyMix zero_mix{0.0, 0.0, 0.0, 0.0};
  Dataset idle = generate_dataset(lw, zero_mix, 10, 5);
  for (const auto& t : idle.trajectories) CHECK(t.total_return == 0.0);
  CHECK(idle.return_scale == 1.0);
  const EnvSpec& dc = env_spec("delaychain");
  CHECK(generate_dataset(dc, max_mix, 1, 5).trajectories[0].total_return ==
        return_bounds(dc).max_return);
}

TEST_CASE("default policy mix spans the return range") {
  for (const auto& n : env_names()) {
    const EnvSpec& spec = env_spec(n);
    Dataset d = generate_dataset(spec, PolicyMix{}, 200, 1);
    CHECK(return_spread(spec, d.trajectories) >= 0.6);
    CHECK(d.return_scale > 0.0);
  }
}

TEST_CASE("spread shortfall names the achieved spread") {
  PolicyMix narrow{0.5, 0.5, 0.0, 0.6};
  try {
    generate_dataset(env_spec("linewalk"), narrow, 5, 1);
    FAIL("expected GenerationError");
  } catch (const GenerationError& e) {
    CHECK(std::string(e.what()).find("spread 0") != std::string::npos);
  }
}

TEST_CASE("generation is deterministic per seed") {
  CHECK(serialized(small_linewalk(12, 3)) == serialized(small_linewalk(12, 3)));
  CHECK(serialized(small_linewalk(12, 3)) != serialized(small_linewalk(12, 4)));
}

TEST_CASE("fill_window agrees with a naive slicer") {
  Dataset d = small_linewalk(20, 8);
  const EnvSpec& spec = env_spec(d.env);
  const std::size_t sd = spec.state_dim, aw = spec.action.width();
  Rng rng(4);
  for (int rep = 0; rep < 1000; ++rep) {
    std::uniform_int_distribution<std::size_t> pt(0, d.trajectories.size() - 1);
    std::uniform_int_distribution<std::size_t> pk(1, 12);
    const std::size_t traj = pt(rng), k = pk(rng);
    const Trajectory& tr = d.trajectories[traj];
    std::uniform_int_distribution<std::size_t> pe(0, tr.length - 1);
    const std::size_t end = pe(rng);
    Window w = Window::empty(2, k, sd, aw);
    fill_window(d, traj, end, k, w, 1);
    // Naive: walk backwards from `end`.
    for (std::size_t back = 0; back < k; ++back) {
      const std::size_t slot = k + (k - 1 - back);
      if (back > end) {
        CHECK(w.pad.real[slot] == 0);
        CHECK(w.rtg[slot] == 0.0);
        for (std::size_t i = 0; i < sd; ++i) CHECK(w.states[slot * sd + i] == 0.0);
        continue;
      }
      const std::size_t t = end - back;
      CHECK(w.pad.real[slot] == 1);
      CHECK(w.timesteps[slot] == static_cast<int>(t));
      CHECK(w.rtg[slot] == tr.returns_to_go[t]);
      for (std::size_t i = 0; i < sd; ++i) CHECK(w.states[slot * sd + i] == tr.states[t * sd + i]);
      for (std::size_t i = 0; i < aw; ++i) CHECK(w.actions[slot * aw + i] == tr.actions[t * aw + i]);
    }
    for (std::size_t j = 0; j < k; ++j) CHECK(w.pad.real[j] == 0);
  }
}

TEST_CASE("window at the first step has one real timestep") {
  Dataset d = small_linewalk();
  Window w = Window::empty(1, 5, 2, 1);
  fill_window(d, 0, 0, 5, w, 0);
  CHECK(std::count(w.pad.real.begin(), w.pad.real.end(), 1) == 1);
  CHECK(w.pad.real[4] == 1);
  CHECK_THROWS_AS(fill_window(d, 0, 40, 5, w, 0), InvalidArgument);
}

TEST_CASE("sample_batch is deterministic and uniform over steps") {
  Dataset d = small_linewalk();
  Rng a(9), b(9);
  Window wa = sample_batch(d, 6, 32, a), wb = sample_batch(d, 6, 32, b);
  CHECK(wa.states == wb.states);
  CHECK(wa.rtg == wb.rtg);
  CHECK(wa.pad.real == wb.pad.real);
  CHECK_THROWS_AS(sample_batch(d, 6, 0, a), InvalidArgument);
  // End timesteps are uniform on [0, 39]: the mean of the last timestep
  // is close to 19.5.
  Rng r(1);
  Window big = sample_batch(d, 1, 20000, r);
  double mean = 0.0;
  for (int t : big.timesteps) mean += t;
  mean /= 20000.0;
  CHECK(std::abs(mean - 19.5) < 0.5);
  for (std::size_t i = 0; i < big.batch; ++i) CHECK(big.pad.real[i] == 1);
}

TEST_CASE("dataset round trip") {
  for (const auto& n : env_names()) {
    PolicyMix mix;
    mix.min_spread = 0.0;
    Dataset d = generate_dataset(env_spec(n), mix, 3, 21);
    std::istringstream in(serialized(d));
    Dataset back = read_dataset(in);
    CHECK(back == d);
    CHECK(serialized(back) == serialized(d));
  }
}

TEST_CASE("malformed dataset files") {
  Dataset d = small_linewalk(3);
  const std::string text = serialized(d);
  // Truncated inside the third line.
  const std::size_t first = text.find('\n'), second = text.find('\n', first + 1);
  std::istringstream cut(text.substr(0, second + 20));
  try {
    read_dataset(cut);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).rfind("line 3", 0) == 0);
  }
  // Missing trailing trajectories.
  std::istringstream short_file(text.substr(0, second + 1));
  CHECK_THROWS_AS(read_dataset(short_file), ParseError);
  std::istringstream empty("");
  CHECK_THROWS_AS(read_dataset(empty), InvalidArgument);
  // Tampered total return.
  std::string bad = text;
  const std::size_t pos = bad.find("\"total_return\":", first);
  bad.insert(pos + 15, "1");
  std::istringstream tampered(bad);
  CHECK_THROWS_AS(read_dataset(tampered), ParseError);
}

TEST_CASE("quantiles and stats") {
  CHECK(quantile({1, 2, 3, 4, 5}, 0.5) == 3.0);
  CHECK(quantile({1, 2, 3, 4, 5}, 0.0) == 1.0);
  CHECK(quantile({1, 2, 3, 4, 5}, 1.0) == 5.0);
  CHECK(quantile({0, 10}, 0.05) == doctest::Approx(0.5));
  CHECK_THROWS_AS(quantile({}, 0.5), InvalidArgument);
  Dataset d = generate_dataset(env_spec("linewalk"), PolicyMix{}, 200, 1);
  DatasetStats s = dataset_stats(d);
  CHECK(s.n_traj == 200);
  CHECK(s.total_steps == 8000);
  CHECK(s.q05 <= s.q25);
  CHECK(s.q25 <= s.q50);
  CHECK(s.q50 <= s.q75);
  CHECK(s.q75 <= s.q95);
  std::size_t count = 0;
  for (auto c : s.histogram) count += c;
  CHECK(count == 200);
  CHECK(stats_json(d, s) == stats_json(d, dataset_stats(d)));
}
