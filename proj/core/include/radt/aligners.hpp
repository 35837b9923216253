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

// Attention and the two return aligners.
//
// Token layouts (0-based positions within a window of K timesteps):
//   state-action sequence: s_0 a_0 s_1 a_1 ... s_{K-1} [a_{K-1}]
//   return sequence:       R_0 R_1 ... R_{K-1}
// Padding is on the left: the first timesteps of a short window are fake.

#ifndef RADT_ALIGNERS_HPP_
#define RADT_ALIGNERS_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "radt/layers.hpp"
#include "radt/tensor.hpp"

namespace radt {

inline constexpr double kLayerNormEps = 1e-5;

struct AttentionParams {
  LinearLayer wq, wk, wv, wo;
  std::size_t n_heads = 1;
};

AttentionParams make_attention(std::size_t width, std::size_t n_heads, Rng& rng);
void register_attention(ParameterSet& params, const std::string& prefix,
                        const AttentionParams& attn);

// Position -> timestep map of a state-action sequence.
struct TimestepMap {
  std::size_t n_timesteps = 0;
  std::size_t length = 0;

  // `length` is 2K (ends with an action) or 2K-1 (ends with a state).
  static TimestepMap state_action(std::size_t n_timesteps, std::size_t length);
  std::size_t timestep(std::size_t pos) const { return pos / 2; }
  bool is_state(std::size_t pos) const { return pos % 2 == 0; }
};

// Per batch row, which of the K timesteps hold real data.
struct PadMask {
  std::size_t batch = 0;
  std::size_t k = 0;
  std::vector<std::uint8_t> real;  // [batch x k]

  static PadMask all_real(std::size_t batch, std::size_t k);
  bool is_real(std::size_t b, std::size_t t) const { return real[b * k + t] != 0; }
  // Token-level mask for a sequence where token i belongs to timestep
  // `timestep_of(i)`.
  template <class F>
  std::vector<std::uint8_t> tokens(std::size_t length, F&& timestep_of) const {
    std::vector<std::uint8_t> out(batch * length);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t i = 0; i < length; ++i)
        out[b * length + i] = real[b * k + timestep_of(i)];
    return out;
  }
};

// Score tensors captured from attention calls.
struct AttentionCapture {
  std::string site;  // e.g. "block0.self", "block0.seqra"
  std::size_t batch = 0, heads = 0, queries = 0, keys = 0;
  std::vector<double> scores;  // [batch x heads x queries x keys]

  double at(std::size_t b, std::size_t h, std::size_t q, std::size_t k) const {
    return scores[((b * heads + h) * queries + q) * keys + k];
  }
};

class AttentionSink {
 public:
  void record(AttentionCapture capture) { captures_.push_back(std::move(capture)); }
  const std::vector<AttentionCapture>& captures() const { return captures_; }
  const AttentionCapture* find(std::string_view site) const;
  void clear() { captures_.clear(); }

 private:
  std::vector<AttentionCapture> captures_;
};

struct AttentionOptions {
  // Divide logits by sqrt(head_dim). Disable for the unscaled dot product.
  bool scale_logits = true;
  double dropout = 0.0;
  bool training = false;
  Rng* rng = nullptr;
  AttentionSink* sink = nullptr;
  std::string site;
};

// Multi-head attention of `queries` [B x Lq x D] over `keys_values`
// [B x Lk x D] with an explicit visibility mask [B x Lq x Lk].
Tensor multi_head_attention(const AttentionParams& params, const Tensor& queries,
                            const Tensor& keys_values,
                            std::span<const std::uint8_t> mask,
                            const AttentionOptions& options);

// Visibility for causal self-attention: key j <= query i, and key j real.
// A padded query sees only itself so its row stays well defined; real
// queries never see padded keys.
std::vector<std::uint8_t> causal_mask(std::size_t batch, std::size_t length,
                                      std::span<const std::uint8_t> token_real);

Tensor causal_self_attention(const AttentionParams& params, const Tensor& x,
                             std::span<const std::uint8_t> token_real,
                             const AttentionOptions& options);

// ---------------------------------------------------------------------------
// Sequence return aligner: cross-attention from state-action tokens onto
// return-to-go tokens, followed by a gated residual merge.

struct SeqRaParams {
  AttentionParams attention;
  LinearLayer scale_proj;  // 2D -> D, zero-initialized
};

SeqRaParams make_seqra(std::size_t width, std::size_t n_heads, Rng& rng);
void register_seqra(ParameterSet& params, const std::string& prefix,
                    const SeqRaParams& seqra);

// Position i may attend return tokens at timesteps <= t(i) that are real.
std::vector<std::uint8_t> seqra_mask(const TimestepMap& map, const PadMask& pad);

// z_i: aggregation of return tokens for each state-action position.
Tensor seqra_attention(const SeqRaParams& params, const Tensor& sa,
                       const Tensor& returns, const TimestepMap& map,
                       const PadMask& pad, const AttentionOptions& options);

// (1 + lambda) * z + sa, with lambda = scale_proj([z; sa]).
Tensor adaptive_scale(const SeqRaParams& params, const Tensor& z,
                      const Tensor& sa);

// ---------------------------------------------------------------------------
// Stepwise return aligner: layer norm modulated by the same-timestep return
// token, (1 + gamma_j) * LN(x_i) + beta_j.

struct StepRaParams {
  MlpHead mlp_gamma;
  MlpHead mlp_beta;
  double eps = kLayerNormEps;
};

StepRaParams make_stepra(std::size_t width, Rng& rng);
void register_stepra(ParameterSet& params, const std::string& prefix,
                     const StepRaParams& stepra);

Tensor stepra(const StepRaParams& params, const Tensor& sa,
              const Tensor& returns, const TimestepMap& map);

}  // namespace radt

#endif  // RADT_ALIGNERS_HPP_
