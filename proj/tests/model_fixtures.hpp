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

// Small models, random windows, and reference blocks shared by the model
// tests and the acceptance binary.

#ifndef RADT_TESTS_MODEL_FIXTURES_HPP_
#define RADT_TESTS_MODEL_FIXTURES_HPP_

#include <random>

#include "radt/model.hpp"

namespace radt::testing {

inline RadtConfig toy_config(Variant variant, std::size_t k = 3,
                             std::size_t d = 16, std::size_t layers = 2,
                             bool discrete = false) {
  RadtConfig c;
  c.variant = variant;
  c.n_layers = layers;
  c.n_heads = 2;
  c.d_model = d;
  c.context_length = k;
  c.max_timesteps = 40;
  c.dropout = 0.0;
  c.state_dim = 3;
  c.action = discrete ? ActionSpace::categorical(4) : ActionSpace::continuous(2, 1.0);
  return c;
}

// Overwrites every parameter with N(0, stddev), including zero-initialized
// ones, so all gradient paths are exercised.
inline void randomize_parameters(Model& model, Rng& rng, double stddev = 0.3) {
  std::normal_distribution<double> n(0.0, stddev);
  for (const auto& [name, t] : model.parameters().entries()) {
    Tensor p = t;
    for (double& v : p.mutable_data()) v = n(rng);
  }
}

// Random window; row b has `real_len[b]` real timesteps on the right.
inline Window random_window(const RadtConfig& c, std::size_t batch, std::size_t k,
                            Rng& rng, std::vector<std::size_t> real_len = {}) {
  const std::size_t aw = c.action.width();
  Window w = Window::empty(batch, k, c.state_dim, aw);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_int_distribution<int> cls(0, static_cast<int>(c.action.size) - 1);
  std::uniform_int_distribution<int> start(0, 20);
  for (std::size_t b = 0; b < batch; ++b) {
    const std::size_t len = real_len.empty() ? k : real_len[b];
    const int t0 = start(rng);
    for (std::size_t t = k - len; t < k; ++t) {
      const std::size_t row = b * k + t;
      w.pad.real[row] = 1;
      w.rtg[row] = 10.0 * n(rng);
      w.timesteps[row] = t0 + static_cast<int>(t - (k - len));
      for (std::size_t i = 0; i < c.state_dim; ++i)
        w.states[row * c.state_dim + i] = n(rng);
      for (std::size_t i = 0; i < aw; ++i)
        w.actions[row * aw + i] =
            c.action.discrete ? cls(rng) : std::tanh(n(rng)) * c.action.bound;
    }
  }
  return w;
}

// Post-LN transformer block with no return pathway beyond an additive
// cross-attention residual: LN(x + SA(x)), LN(. + CA(., r)), LN(. + FF(.)).
inline Tensor reference_post_ln_block(const RadtBlock& b, const Tensor& sa,
                                      const Tensor& returns,
                                      const TimestepMap& map, const PadMask& pad,
                                      bool with_cross) {
  auto real = pad.tokens(map.length, [&](std::size_t i) { return map.timestep(i); });
  Tensor x = layer_norm(add(sa, causal_self_attention(b.self_attn, sa, real, {})),
                        kLayerNormEps);
  if (with_cross) {
    Tensor z = seqra_attention(b.seqra, x, returns, map, pad, {});
    x = layer_norm(add(z, x), kLayerNormEps);
  }
  Tensor ff = linear_forward(b.ff_out, gelu(linear_forward(b.ff_in, x)));
  return layer_norm(add(x, ff), kLayerNormEps);
}

}  // namespace radt::testing

#endif  // RADT_TESTS_MODEL_FIXTURES_HPP_
