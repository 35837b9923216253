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

#include "radt/aligners.hpp"

#include <cmath>

namespace radt {

AttentionParams make_attention(std::size_t width, std::size_t n_heads,
                               Rng& rng) {
  if (n_heads == 0 || width % n_heads != 0)
    throw InvalidArgument("attention width " + std::to_string(width) +
                          " is not divisible by " + std::to_string(n_heads) +
                          " heads");
  AttentionParams p;
  p.wq = make_linear(width, width, InitMode::kScaledNormal, rng);
  p.wk = make_linear(width, width, InitMode::kScaledNormal, rng);
  p.wv = make_linear(width, width, InitMode::kScaledNormal, rng);
  p.wo = make_linear(width, width, InitMode::kScaledNormal, rng);
  p.n_heads = n_heads;
  return p;
}

void register_attention(ParameterSet& params, const std::string& prefix,
                        const AttentionParams& attn) {
  params.add_linear(prefix + ".wq", attn.wq);
  params.add_linear(prefix + ".wk", attn.wk);
  params.add_linear(prefix + ".wv", attn.wv);
  params.add_linear(prefix + ".wo", attn.wo);
}

TimestepMap TimestepMap::state_action(std::size_t n_timesteps,
                                      std::size_t length) {
  if (n_timesteps == 0 ||
      (length != 2 * n_timesteps && length + 1 != 2 * n_timesteps))
    throw DimensionError("state-action length " + std::to_string(length) +
                         " does not fit " + std::to_string(n_timesteps) +
                         " timesteps");
  return TimestepMap{n_timesteps, length};
}

PadMask PadMask::all_real(std::size_t batch, std::size_t k) {
  return PadMask{batch, k, std::vector<std::uint8_t>(batch * k, 1)};
}

const AttentionCapture* AttentionSink::find(std::string_view site) const {
  for (const auto& c : captures_)
    if (c.site == site) return &c;
  return nullptr;
}

Tensor multi_head_attention(const AttentionParams& params, const Tensor& queries,
                            const Tensor& keys_values,
                            std::span<const std::uint8_t> mask,
                            const AttentionOptions& options) {
  if (queries.ndim() != 3 || keys_values.ndim() != 3 ||
      queries.dim(0) != keys_values.dim(0))
    throw DimensionError("attention: queries " + shape_string(queries.shape()) +
                         " and keys " + shape_string(keys_values.shape()) +
                         " must be [B x L x D] with equal B");
  const std::size_t batch = queries.dim(0), lq = queries.dim(1),
                    lk = keys_values.dim(1), width = queries.dim(2);
  const std::size_t heads = params.n_heads;
  if (mask.size() != batch * lq * lk)
    throw DimensionError("attention: mask has " + std::to_string(mask.size()) +
                         " entries, expected " + std::to_string(batch * lq * lk));

  Tensor q = split_heads(linear_forward(params.wq, queries), heads);
  Tensor k = split_heads(linear_forward(params.wk, keys_values), heads);
  Tensor v = split_heads(linear_forward(params.wv, keys_values), heads);
  Tensor logits = bmm_nt(q, k);  // [B*H x Lq x Lk]
  if (options.scale_logits)
    logits = scale(logits, 1.0 / std::sqrt(static_cast<double>(width / heads)));

  std::vector<std::uint8_t> head_mask(batch * heads * lq * lk);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t h = 0; h < heads; ++h)
      std::copy(mask.begin() + b * lq * lk, mask.begin() + (b + 1) * lq * lk,
                head_mask.begin() + (b * heads + h) * lq * lk);
  Tensor probs = softmax_masked(logits, head_mask);

  if (options.sink != nullptr) {
    AttentionCapture cap;
    cap.site = options.site;
    cap.batch = batch;
    cap.heads = heads;
    cap.queries = lq;
    cap.keys = lk;
    cap.scores.assign(probs.data().begin(), probs.data().end());
    options.sink->record(std::move(cap));
  }
  if (options.training && options.dropout > 0.0) {
    if (options.rng == nullptr)
      throw InvalidArgument("attention dropout in training mode needs an rng");
    probs = dropout(probs, options.dropout, true, *options.rng);
  }
  Tensor mixed = merge_heads(bmm(probs, v), heads);
  return linear_forward(params.wo, mixed);
}

std::vector<std::uint8_t> causal_mask(std::size_t batch, std::size_t length,
                                      std::span<const std::uint8_t> token_real) {
  if (token_real.size() != batch * length)
    throw DimensionError("causal_mask: token mask size mismatch");
  std::vector<std::uint8_t> mask(batch * length * length, 0);
  for (std::size_t b = 0; b < batch; ++b) {
    const std::uint8_t* real = token_real.data() + b * length;
    bool any = false;
    for (std::size_t i = 0; i < length; ++i) any |= real[i] != 0;
    if (!any)
      throw InvalidMaskError("causal self-attention: batch row " +
                             std::to_string(b) + " is fully padded");
    for (std::size_t i = 0; i < length; ++i) {
      std::uint8_t* row = mask.data() + (b * length + i) * length;
      if (!real[i]) {
        row[i] = 1;
        continue;
      }
      for (std::size_t j = 0; j <= i; ++j) row[j] = real[j];
    }
  }
  return mask;
}

Tensor causal_self_attention(const AttentionParams& params, const Tensor& x,
                             std::span<const std::uint8_t> token_real,
                             const AttentionOptions& options) {
  if (x.ndim() != 3)
    throw DimensionError("causal_self_attention: expected [B x L x D], got " +
                         shape_string(x.shape()));
  auto mask = causal_mask(x.dim(0), x.dim(1), token_real);
  return multi_head_attention(params, x, x, mask, options);
}

// ---------------------------------------------------------------------------

SeqRaParams make_seqra(std::size_t width, std::size_t n_heads, Rng& rng) {
  SeqRaParams p;
  p.attention = make_attention(width, n_heads, rng);
  p.scale_proj = make_linear(2 * width, width, InitMode::kZero, rng);
  return p;
}

void register_seqra(ParameterSet& params, const std::string& prefix,
                    const SeqRaParams& seqra) {
  register_attention(params, prefix + ".attn", seqra.attention);
  params.add_linear(prefix + ".scale_proj", seqra.scale_proj);
}

std::vector<std::uint8_t> seqra_mask(const TimestepMap& map, const PadMask& pad) {
  if (pad.k != map.n_timesteps)
    throw DimensionError("seqra_mask: pad mask covers " + std::to_string(pad.k) +
                         " timesteps, map has " +
                         std::to_string(map.n_timesteps));
  const std::size_t l = map.length, k = map.n_timesteps;
  std::vector<std::uint8_t> mask(pad.batch * l * k, 0);
  for (std::size_t b = 0; b < pad.batch; ++b) {
    for (std::size_t i = 0; i < l; ++i) {
      const std::size_t t = map.timestep(i);
      std::uint8_t* row = mask.data() + (b * l + i) * k;
      if (!pad.is_real(b, t)) {
        row[t] = 1;
        continue;
      }
      for (std::size_t j = 0; j <= t; ++j) row[j] = pad.is_real(b, j) ? 1 : 0;
    }
  }
  return mask;
}

Tensor seqra_attention(const SeqRaParams& params, const Tensor& sa,
                       const Tensor& returns, const TimestepMap& map,
                       const PadMask& pad, const AttentionOptions& options) {
  if (sa.ndim() != 3 || sa.dim(1) != map.length || returns.ndim() != 3 ||
      returns.dim(1) != map.n_timesteps)
    throw DimensionError("seqra: state-action " + shape_string(sa.shape()) +
                         " / returns " + shape_string(returns.shape()) +
                         " do not match the timestep map");
  auto mask = seqra_mask(map, pad);
  return multi_head_attention(params.attention, sa, returns, mask, options);
}

Tensor adaptive_scale(const SeqRaParams& params, const Tensor& z,
                      const Tensor& sa) {
  if (z.shape() != sa.shape())
    throw DimensionError("adaptive_scale: z " + shape_string(z.shape()) +
                         " vs state-action " + shape_string(sa.shape()));
  Tensor lambda = linear_forward(params.scale_proj, concat_last(z, sa));
  return add(hadamard(add_scalar(lambda, 1.0), z), sa);
}

// ---------------------------------------------------------------------------

StepRaParams make_stepra(std::size_t width, Rng& rng) {
  StepRaParams p;
  p.mlp_gamma = make_mlp({width, width, width}, Activation::kSilu, true, rng);
  p.mlp_beta = make_mlp({width, width, width}, Activation::kSilu, true, rng);
  return p;
}

void register_stepra(ParameterSet& params, const std::string& prefix,
                     const StepRaParams& stepra) {
  params.add_mlp(prefix + ".mlp_gamma", stepra.mlp_gamma);
  params.add_mlp(prefix + ".mlp_beta", stepra.mlp_beta);
}

Tensor stepra(const StepRaParams& params, const Tensor& sa,
              const Tensor& returns, const TimestepMap& map) {
  if (sa.ndim() != 3 || sa.dim(1) != map.length || returns.ndim() != 3 ||
      returns.dim(1) != map.n_timesteps || returns.dim(0) != sa.dim(0))
    throw DimensionError("stepra: state-action " + shape_string(sa.shape()) +
                         " / returns " + shape_string(returns.shape()) +
                         " do not match the timestep map");
  const std::size_t batch = sa.dim(0), l = map.length, k = map.n_timesteps;
  std::vector<std::size_t> rows(batch * l);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < l; ++i) rows[b * l + i] = b * k + map.timestep(i);

  Tensor gamma = gather_rows(mlp_forward(params.mlp_gamma, returns), rows, {batch, l});
  Tensor beta = gather_rows(mlp_forward(params.mlp_beta, returns), rows, {batch, l});
  return add(hadamard(add_scalar(gamma, 1.0), layer_norm(sa, params.eps)), beta);
}

}  // namespace radt
