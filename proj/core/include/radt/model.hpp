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

// RADT and the Decision Transformer baseline.
//
// Both variants read a window of the last K timesteps and predict the action
// at every state token. RADT keeps returns in a separate stream that enters
// each block through SeqRA and StepRA; DT interleaves (R, s, a) tokens into a
// single causal sequence.

#ifndef RADT_MODEL_HPP_
#define RADT_MODEL_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "radt/aligners.hpp"
#include "radt/config.hpp"
#include "radt/layers.hpp"
#include "radt/tensor.hpp"

namespace radt {

enum class Variant { kRadt, kDt };

std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view name);

struct ActionSpace {
  bool discrete = false;
  std::size_t size = 1;  // action dim (continuous) or number of actions
  double bound = 1.0;    // continuous actions lie in [-bound, bound]

  static ActionSpace continuous(std::size_t dim, double bound) {
    return {false, dim, bound};
  }
  static ActionSpace categorical(std::size_t n) { return {true, n, 0.0}; }
  // Width of one action in a window: dim, or 1 for a discrete index.
  std::size_t width() const { return discrete ? 1 : size; }
  bool operator==(const ActionSpace&) const = default;
};

struct RadtConfig {
  Variant variant = Variant::kRadt;
  std::size_t n_layers = 2;
  std::size_t n_heads = 1;
  std::size_t d_model = 64;
  std::size_t context_length = 10;
  std::size_t max_timesteps = 64;
  double dropout = 0.1;
  bool use_seqra = true;
  bool use_stepra = true;
  bool use_adaptive_scaling = true;
  bool scale_attention = true;
  std::size_t state_dim = 2;
  ActionSpace action;

  void validate() const;
  // Writes the [model] section.
  void to_ini(IniDocument& doc) const;
  static RadtConfig from_ini(const IniDocument& doc);
  std::string canonical_text() const;
  std::uint64_t digest() const { return fnv1a64(canonical_text()); }
};

// A batch of raw, left-padded K-timestep windows. Padded slots hold zeros.
struct Window {
  std::size_t batch = 0;
  std::size_t k = 0;
  std::vector<double> rtg;        // [B x K]
  std::vector<double> states;     // [B x K x state_dim]
  std::vector<double> actions;    // [B x K x action width]; class ids if discrete
  std::vector<int> timesteps;     // [B x K], 0-based
  PadMask pad;

  static Window empty(std::size_t batch, std::size_t k, std::size_t state_dim,
                      std::size_t action_width);
  // Real (batch, timestep) rows, as a [B*K] mask.
  std::span<const std::uint8_t> real() const { return pad.real; }
};

struct TokenizedWindow {
  Tensor returns;  // [B x K x D]  (DT: unused)
  Tensor sa;       // RADT: [B x (2K-1) x D]; DT: [B x (3K-1) x D] interleaved
  TimestepMap map;
  PadMask pad;
};

struct ForwardOptions {
  bool training = false;
  Rng* rng = nullptr;
  AttentionSink* sink = nullptr;
};

struct RadtBlock {
  AttentionParams self_attn;
  SeqRaParams seqra;
  StepRaParams norm_attn, norm_seqra, norm_ff;
  LinearLayer ff_in, ff_out;
};

struct DtBlock {
  Tensor ln1_gain, ln1_bias, ln2_gain, ln2_bias;
  AttentionParams attn;
  LinearLayer ff_in, ff_out;
};

class Model {
 public:
  Model(const RadtConfig& config, std::uint64_t seed);

  const RadtConfig& config() const { return config_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }

  // Returns are divided by this before embedding.
  double return_scale() const { return return_scale_; }
  void set_return_scale(double s);

  TokenizedWindow embed(const Window& w) const;
  // Action outputs at every state token: [B x K x A]. Continuous outputs are
  // tanh-squashed into the action bounds; discrete outputs are logits.
  Tensor forward(const Window& w, const ForwardOptions& options = {}) const;
  // Mean loss over real state positions (or only the last one).
  Tensor loss(const Tensor& predictions, const Window& w,
              bool last_position_only = false) const;

  // RADT block on already-embedded tokens; exposed for tests.
  Tensor radt_block(std::size_t index, const Tensor& sa, const Tensor& returns,
                    const TimestepMap& map, const PadMask& pad,
                    const ForwardOptions& options) const;

  const std::vector<RadtBlock>& radt_blocks() const { return radt_blocks_; }
  const std::vector<DtBlock>& dt_blocks() const { return dt_blocks_; }

  // JSON: config, parameter count, parameter names grouped by module.
  std::string summary_json() const;

 private:
  Tensor forward_radt(const TokenizedWindow& tw, const ForwardOptions& o) const;
  Tensor forward_dt(const TokenizedWindow& tw, const ForwardOptions& o) const;
  Tensor norm(const StepRaParams& p, const Tensor& x, const Tensor& returns,
              const TimestepMap& map) const;
  Tensor head(const Tensor& states) const;
  Tensor sublayer_dropout(const Tensor& x, const ForwardOptions& o) const;
  AttentionOptions attention_options(const ForwardOptions& o,
                                     std::string site) const;

  RadtConfig config_;
  double return_scale_ = 1.0;
  ParameterSet params_;

  LinearLayer embed_return_, embed_state_, embed_action_;
  EmbeddingTable embed_action_table_, embed_timestep_;
  std::vector<RadtBlock> radt_blocks_;
  std::vector<DtBlock> dt_blocks_;
  Tensor embed_ln_gain_, embed_ln_bias_;  // DT only
  StepRaParams final_norm_;               // RADT
  Tensor final_ln_gain_, final_ln_bias_;  // DT
  LinearLayer head_;
};

// Checkpoint helpers tying the model to the layers-module file format.
CheckpointHeader checkpoint_header(const Model& model);
void save_model(const std::string& path, const Model& model);
// Rebuilds the model from the config stored in the checkpoint.
Model load_model(const std::string& path);

}  // namespace radt

#endif  // RADT_MODEL_HPP_
