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


#include <benchmark/benchmark.h>

#include <vector>

#include "radt/aligners.hpp"
#include "radt/data.hpp"
#include "radt/eval.hpp"
#include "radt/model.hpp"
#include "radt/train.hpp"

namespace {

using namespace radt;

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  Tensor a = Tensor::normal({n, n}, 1.0, rng, false);
  Tensor b = Tensor::normal({n, n}, 1.0, rng, false);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b).data().data());
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * 2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(16)->Arg(32)->Arg(64)->Arg(128);

void BM_SelfAttention(benchmark::State& state) {
  const auto length = static_cast<std::size_t>(state.range(0));
  const std::size_t d = 32, batch = 16;
  Rng rng(2);
  AttentionParams p = make_attention(d, 1, rng);
  Tensor x = Tensor::normal({batch, length, d}, 1.0, rng, true);
  std::vector<std::uint8_t> real(batch * length, 1);
  for (auto _ : state) {
    Tensor y = sum(causal_self_attention(p, x, real, {}));
    backward(y);
  }
}
BENCHMARK(BM_SelfAttention)->Arg(19)->Arg(29)->Unit(benchmark::kMicrosecond);

// One optimizer step at the linewalk experiment size.
void BM_TrainStep(benchmark::State& state) {
  const bool dt = state.range(0) == 1;
  const EnvSpec& spec = env_spec("linewalk");
  Dataset data = generate_dataset(spec, PolicyMix{}, 200, 1);
  RadtConfig c;
  c.variant = dt ? Variant::kDt : Variant::kRadt;
  c.d_model = 32;
  c.n_heads = 1;
  c.context_length = 10;
  c.state_dim = spec.state_dim;
  c.action = spec.action;
  c.max_timesteps = spec.horizon;
  Model model(c, 1);
  model.set_return_scale(data.return_scale);
  ParameterSet& params = model.parameters();
  OptimizerState opt(params, {});
  Rng sample(3), drop(4);
  for (auto _ : state) {
    Window w = sample_batch(data, c.context_length, 16, sample);
    ForwardOptions fo;
    fo.training = true;
    fo.rng = &drop;
    Tensor loss = model.loss(model.forward(w, fo), w);
    params.zero_grads();
    backward(loss);
    clip_grad_norm(params, 0.25);
    adamw_step(opt, params, 1e-4);
  }
  state.SetLabel(dt ? "dt" : "radt");
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Rollout(benchmark::State& state) {
  const EnvSpec& spec = env_spec("linewalk");
  RadtConfig c;
  c.d_model = 32;
  c.n_heads = 1;
  c.context_length = 10;
  c.state_dim = spec.state_dim;
  c.action = spec.action;
  c.max_timesteps = spec.horizon;
  Model model(c, 1);
  model.set_return_scale(35.0);
  const Policy policy = greedy_policy(model, spec);
  std::vector<double> targets(70, 20.0);
  std::vector<std::uint64_t> seeds(70);
  for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = i;
  for (auto _ : state)
    benchmark::DoNotOptimize(rollout_batch(policy, spec, targets, seeds).size());
}
BENCHMARK(BM_Rollout)->Unit(benchmark::kMillisecond);

void BM_GenerateDataset(benchmark::State& state) {
  const EnvSpec& spec = env_spec("linewalk");
  for (auto _ : state)
    benchmark::DoNotOptimize(generate_dataset(spec, PolicyMix{}, 200, 1).trajectories.size());
}
BENCHMARK(BM_GenerateDataset)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
