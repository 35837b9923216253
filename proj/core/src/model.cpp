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

#include "radt/model.hpp"

#include <cmath>
#include <map>

#include "json.hpp"

namespace radt {

std::string_view variant_name(Variant v) {
  return v == Variant::kRadt ? "radt" : "dt";
}

Variant parse_variant(std::string_view name) {
  if (name == "radt" || name == "RADT") return Variant::kRadt;
  if (name == "dt" || name == "DT") return Variant::kDt;
  throw InvalidArgument("unknown variant '" + std::string(name) +
                        "' (expected radt or dt)");
}

// ---------------------------------------------------------------------------
// Config

void RadtConfig::validate() const {
  auto fail = [](const std::string& msg) { throw InvalidArgument("model config: " + msg); };
  if (context_length < 1) fail("context_length must be >= 1");
  if (n_layers < 1) fail("n_layers must be >= 1");
  if (n_heads < 1 || d_model % n_heads != 0)
    fail("d_model " + std::to_string(d_model) + " is not divisible by n_heads " +
         std::to_string(n_heads));
  if (max_timesteps < 1) fail("max_timesteps must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0, 1)");
  if (state_dim < 1) fail("state_dim must be >= 1");
  if (action.size < 1) fail("action size must be >= 1");
  if (!action.discrete && !(action.bound > 0.0)) fail("action bound must be > 0");
}

void RadtConfig::to_ini(IniDocument& doc) const {
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  doc.set("model", "variant", std::string(variant_name(variant)));
  doc.set("model", "n_layers", std::to_string(n_layers));
  doc.set("model", "n_heads", std::to_string(n_heads));
  doc.set("model", "d_model", std::to_string(d_model));
  doc.set("model", "context_length", std::to_string(context_length));
  doc.set("model", "max_timesteps", std::to_string(max_timesteps));
  doc.set("model", "dropout", format_double(dropout));
  doc.set("model", "use_seqra", b(use_seqra));
  doc.set("model", "use_stepra", b(use_stepra));
  doc.set("model", "use_adaptive_scaling", b(use_adaptive_scaling));
  doc.set("model", "scale_attention", b(scale_attention));
  doc.set("model", "state_dim", std::to_string(state_dim));
  doc.set("model", "action_space", action.discrete ? "discrete" : "continuous");
  doc.set("model", "action_size", std::to_string(action.size));
  doc.set("model", "action_bound", format_double(action.bound));
}

RadtConfig RadtConfig::from_ini(const IniDocument& doc) {
  doc.expect_keys("model", {"variant", "n_layers", "n_heads", "d_model",
                            "context_length", "max_timesteps", "dropout",
                            "use_seqra", "use_stepra", "use_adaptive_scaling",
                            "scale_attention", "state_dim", "action_space",
                            "action_size", "action_bound"});
  RadtConfig c;
  c.variant = parse_variant(doc.get_string("model", "variant", "radt"));
  c.n_layers = doc.get_size("model", "n_layers", c.n_layers);
  c.n_heads = doc.get_size("model", "n_heads", c.n_heads);
  c.d_model = doc.get_size("model", "d_model", c.d_model);
  c.context_length = doc.get_size("model", "context_length", c.context_length);
  c.max_timesteps = doc.get_size("model", "max_timesteps", c.max_timesteps);
  c.dropout = doc.get_double("model", "dropout", c.dropout);
  c.use_seqra = doc.get_bool("model", "use_seqra", c.use_seqra);
  c.use_stepra = doc.get_bool("model", "use_stepra", c.use_stepra);
  c.use_adaptive_scaling =
      doc.get_bool("model", "use_adaptive_scaling", c.use_adaptive_scaling);
  c.scale_attention = doc.get_bool("model", "scale_attention", c.scale_attention);
  c.state_dim = doc.get_size("model", "state_dim", c.state_dim);
  const std::string space = doc.get_string("model", "action_space", "continuous");
  if (space == "discrete") {
    c.action = ActionSpace::categorical(doc.get_size("model", "action_size", 1));
  } else if (space == "continuous") {
    c.action = ActionSpace::continuous(doc.get_size("model", "action_size", 1),
                                       doc.get_double("model", "action_bound", 1.0));
  } else {
    const auto* e = doc.find("model", "action_space");
    throw ParseError("model.action_space: expected continuous or discrete",
                     e ? e->line : 0);
  }
  c.validate();
  return c;
}

std::string RadtConfig::canonical_text() const {
  IniDocument doc;
  to_ini(doc);
  return doc.to_text();
}

Window Window::empty(std::size_t batch, std::size_t k, std::size_t state_dim,
                     std::size_t action_width) {
  Window w;
  w.batch = batch;
  w.k = k;
  w.rtg.assign(batch * k, 0.0);
  w.states.assign(batch * k * state_dim, 0.0);
  w.actions.assign(batch * k * action_width, 0.0);
  w.timesteps.assign(batch * k, 0);
  w.pad = PadMask{batch, k, std::vector<std::uint8_t>(batch * k, 0)};
  return w;
}

// ---------------------------------------------------------------------------
// Construction

namespace {

Tensor affine_layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
  return add(hadamard(layer_norm(x, kLayerNormEps), gain), bias);
}

void register_stepra_if(ParameterSet& p, bool on, const std::string& name,
                        const StepRaParams& s) {
  if (on) register_stepra(p, name, s);
}

}  // namespace

Model::Model(const RadtConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  const std::size_t d = config_.d_model;
  const bool radt = config_.variant == Variant::kRadt;

  embed_return_ = make_linear(1, d, InitMode::kScaledNormal, rng);
  embed_state_ = make_linear(config_.state_dim, d, InitMode::kScaledNormal, rng);
  params_.add_linear("embed.return", embed_return_);
  params_.add_linear("embed.state", embed_state_);
  if (config_.action.discrete) {
    embed_action_table_ = make_embedding(config_.action.size, d, rng);
    params_.add("embed.action.table", embed_action_table_.table);
  } else {
    embed_action_ = make_linear(config_.action.size, d, InitMode::kScaledNormal, rng);
    params_.add_linear("embed.action", embed_action_);
  }
  embed_timestep_ = make_embedding(config_.max_timesteps, d, rng);
  params_.add("embed.timestep.table", embed_timestep_.table);

  if (radt) {
    for (std::size_t i = 0; i < config_.n_layers; ++i) {
      const std::string name = "block" + std::to_string(i);
      RadtBlock b;
      b.self_attn = make_attention(d, config_.n_heads, rng);
      b.seqra = make_seqra(d, config_.n_heads, rng);
      b.norm_attn = make_stepra(d, rng);
      b.norm_seqra = make_stepra(d, rng);
      b.norm_ff = make_stepra(d, rng);
      b.ff_in = make_linear(d, 4 * d, InitMode::kScaledNormal, rng);
      b.ff_out = make_linear(4 * d, d, InitMode::kScaledNormal, rng);

      register_attention(params_, name + ".self", b.self_attn);
      register_stepra_if(params_, config_.use_stepra, name + ".norm_attn", b.norm_attn);
      if (config_.use_seqra) {
        register_attention(params_, name + ".seqra.attn", b.seqra.attention);
        if (config_.use_adaptive_scaling)
          params_.add_linear(name + ".seqra.scale_proj", b.seqra.scale_proj);
        register_stepra_if(params_, config_.use_stepra, name + ".norm_seqra",
                           b.norm_seqra);
      }
      params_.add_linear(name + ".ff_in", b.ff_in);
      params_.add_linear(name + ".ff_out", b.ff_out);
      register_stepra_if(params_, config_.use_stepra, name + ".norm_ff", b.norm_ff);
      radt_blocks_.push_back(std::move(b));
    }
    final_norm_ = make_stepra(d, rng);
    register_stepra_if(params_, config_.use_stepra, "final_norm", final_norm_);
  } else {
    embed_ln_gain_ = Tensor::full({d}, 1.0, true);
    embed_ln_bias_ = Tensor::zeros({d}, true);
    params_.add("embed_ln.gain", embed_ln_gain_);
    params_.add("embed_ln.bias", embed_ln_bias_);
    for (std::size_t i = 0; i < config_.n_layers; ++i) {
      const std::string name = "block" + std::to_string(i);
      DtBlock b;
      b.ln1_gain = Tensor::full({d}, 1.0, true);
      b.ln1_bias = Tensor::zeros({d}, true);
      b.attn = make_attention(d, config_.n_heads, rng);
      b.ln2_gain = Tensor::full({d}, 1.0, true);
      b.ln2_bias = Tensor::zeros({d}, true);
      b.ff_in = make_linear(d, 4 * d, InitMode::kScaledNormal, rng);
      b.ff_out = make_linear(4 * d, d, InitMode::kScaledNormal, rng);
      params_.add(name + ".ln1.gain", b.ln1_gain);
      params_.add(name + ".ln1.bias", b.ln1_bias);
      register_attention(params_, name + ".attn", b.attn);
      params_.add(name + ".ln2.gain", b.ln2_gain);
      params_.add(name + ".ln2.bias", b.ln2_bias);
      params_.add_linear(name + ".ff_in", b.ff_in);
      params_.add_linear(name + ".ff_out", b.ff_out);
      dt_blocks_.push_back(std::move(b));
    }
    final_ln_gain_ = Tensor::full({d}, 1.0, true);
    final_ln_bias_ = Tensor::zeros({d}, true);
    params_.add("final_ln.gain", final_ln_gain_);
    params_.add("final_ln.bias", final_ln_bias_);
  }
  head_ = make_linear(d, config_.action.size, InitMode::kScaledNormal, rng);
  params_.add_linear("head", head_);
}

void Model::set_return_scale(double s) {
  if (!(s > 0.0) || !std::isfinite(s))
    throw InvalidArgument("return scale must be positive and finite");
  return_scale_ = s;
}

// ---------------------------------------------------------------------------
// Embedding

TokenizedWindow Model::embed(const Window& w) const {
  const std::size_t b = w.batch, k = w.k, d = config_.d_model;
  const std::size_t sdim = config_.state_dim, aw = config_.action.width();
  if (k < 1 || k > config_.context_length)
    throw DimensionError("window of " + std::to_string(k) +
                         " timesteps exceeds context length " +
                         std::to_string(config_.context_length));
  if (w.rtg.size() != b * k || w.states.size() != b * k * sdim ||
      w.actions.size() != b * k * aw || w.timesteps.size() != b * k ||
      w.pad.real.size() != b * k || w.pad.batch != b || w.pad.k != k)
    throw DimensionError("malformed window: field sizes do not match batch " +
                         std::to_string(b) + " x " + std::to_string(k));
  for (std::size_t bi = 0; bi < b; ++bi) {
    if (!w.pad.is_real(bi, k - 1))
      throw InvalidMaskError("window " + std::to_string(bi) +
                             " does not end in a real timestep");
    for (std::size_t t = 1; t < k; ++t)
      if (w.pad.is_real(bi, t - 1) && !w.pad.is_real(bi, t))
        throw InvalidMaskError("window " + std::to_string(bi) +
                               " is not left-padded");
  }
  for (int t : w.timesteps)
    if (t < 0 || static_cast<std::size_t>(t) >= config_.max_timesteps)
      throw InvalidArgument("timestep " + std::to_string(t) +
                            " outside [0, " + std::to_string(config_.max_timesteps) +
                            ")");

  Tensor time = embedding_lookup(embed_timestep_, w.timesteps, {b, k});
  std::vector<double> scaled(w.rtg.size());
  for (std::size_t i = 0; i < scaled.size(); ++i) scaled[i] = w.rtg[i] / return_scale_;
  Tensor r = add(linear_forward(embed_return_, Tensor::from({b, k, 1}, std::move(scaled))),
                 time);
  Tensor s = add(linear_forward(embed_state_, Tensor::from({b, k, sdim}, w.states)), time);
  Tensor a;
  if (config_.action.discrete) {
    std::vector<int> ids(w.actions.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (!w.pad.real[i]) continue;  // padded slots may hold anything
      const double v = w.actions[i];
      if (!(v >= 0.0 && v < static_cast<double>(config_.action.size)) ||
          v != std::floor(v))
        throw InvalidArgument("discrete action " + format_double(v) +
                              " is not a valid class index");
      ids[i] = static_cast<int>(v);
    }
    a = add(embedding_lookup(embed_action_table_, ids, {b, k}), time);
  } else {
    a = add(linear_forward(embed_action_, Tensor::from({b, k, aw}, w.actions)), time);
  }

  TokenizedWindow tw;
  tw.pad = w.pad;
  if (config_.variant == Variant::kRadt) {
    // Rows of [s | a] reshaped to [B*K*2 x D]; position 2t is s_t, 2t+1 is a_t.
    const std::size_t l = 2 * k - 1;
    Tensor pairs = concat_last(s, a);
    std::vector<std::size_t> rows(b * l);
    for (std::size_t bi = 0; bi < b; ++bi)
      for (std::size_t i = 0; i < l; ++i) rows[bi * l + i] = bi * 2 * k + i;
    tw.sa = gather_rows(reshape(pairs, {b * k * 2, d}), std::move(rows), {b, l});
    tw.returns = r;
    tw.map = TimestepMap::state_action(k, l);
  } else {
    const std::size_t l = 3 * k - 1;
    Tensor triples = concat_last(concat_last(r, s), a);
    std::vector<std::size_t> rows(b * l);
    for (std::size_t bi = 0; bi < b; ++bi)
      for (std::size_t i = 0; i < l; ++i) rows[bi * l + i] = bi * 3 * k + i;
    tw.sa = gather_rows(reshape(triples, {b * k * 3, d}), std::move(rows), {b, l});
    tw.returns = r;
    tw.map = TimestepMap{k, l};
  }
  return tw;
}

// ---------------------------------------------------------------------------
// Forward

AttentionOptions Model::attention_options(const ForwardOptions& o,
                                          std::string site) const {
  AttentionOptions a;
  a.scale_logits = config_.scale_attention;
  a.dropout = config_.dropout;
  a.training = o.training;
  a.rng = o.rng;
  a.sink = o.sink;
  a.site = std::move(site);
  return a;
}

Tensor Model::sublayer_dropout(const Tensor& x, const ForwardOptions& o) const {
  if (!o.training || config_.dropout == 0.0) return x;
  if (o.rng == nullptr) throw InvalidArgument("training forward needs an rng");
  return dropout(x, config_.dropout, true, *o.rng);
}

Tensor Model::norm(const StepRaParams& p, const Tensor& x, const Tensor& returns,
                   const TimestepMap& map) const {
  if (config_.use_stepra) return stepra(p, x, returns, map);
  return layer_norm(x, kLayerNormEps);
}

Tensor Model::radt_block(std::size_t index, const Tensor& sa,
                         const Tensor& returns, const TimestepMap& map,
                         const PadMask& pad, const ForwardOptions& o) const {
  const RadtBlock& b = radt_blocks_.at(index);
  const std::string name = "block" + std::to_string(index);
  auto real = pad.tokens(map.length, [&](std::size_t i) { return map.timestep(i); });

  Tensor attn = causal_self_attention(b.self_attn, sa, real,
                                      attention_options(o, name + ".self"));
  Tensor x = norm(b.norm_attn, add(sa, sublayer_dropout(attn, o)), returns, map);
  if (config_.use_seqra) {
    Tensor z = sublayer_dropout(
        seqra_attention(b.seqra, x, returns, map, pad,
                        attention_options(o, name + ".seqra")),
        o);
    Tensor merged = config_.use_adaptive_scaling ? adaptive_scale(b.seqra, z, x)
                                                 : add(z, x);
    x = norm(b.norm_seqra, merged, returns, map);
  }
  Tensor ff = linear_forward(b.ff_out, gelu(linear_forward(b.ff_in, x)));
  return norm(b.norm_ff, add(x, sublayer_dropout(ff, o)), returns, map);
}

Tensor Model::forward_radt(const TokenizedWindow& tw, const ForwardOptions& o) const {
  Tensor x = tw.sa;
  for (std::size_t i = 0; i < radt_blocks_.size(); ++i)
    x = radt_block(i, x, tw.returns, tw.map, tw.pad, o);
  x = norm(final_norm_, x, tw.returns, tw.map);
  const std::size_t b = tw.pad.batch, k = tw.pad.k, l = tw.map.length;
  std::vector<std::size_t> rows(b * k);
  for (std::size_t bi = 0; bi < b; ++bi)
    for (std::size_t t = 0; t < k; ++t) rows[bi * k + t] = bi * l + 2 * t;
  return gather_rows(x, std::move(rows), {b, k});
}

Tensor Model::forward_dt(const TokenizedWindow& tw, const ForwardOptions& o) const {
  const std::size_t b = tw.pad.batch, k = tw.pad.k, l = tw.map.length;
  auto real = tw.pad.tokens(l, [](std::size_t i) { return i / 3; });
  Tensor x = affine_layer_norm(tw.sa, embed_ln_gain_, embed_ln_bias_);
  for (std::size_t i = 0; i < dt_blocks_.size(); ++i) {
    const DtBlock& blk = dt_blocks_[i];
    Tensor h = affine_layer_norm(x, blk.ln1_gain, blk.ln1_bias);
    Tensor attn = causal_self_attention(
        blk.attn, h, real, attention_options(o, "block" + std::to_string(i) + ".self"));
    x = add(x, sublayer_dropout(attn, o));
    h = affine_layer_norm(x, blk.ln2_gain, blk.ln2_bias);
    Tensor ff = linear_forward(blk.ff_out, gelu(linear_forward(blk.ff_in, h)));
    x = add(x, sublayer_dropout(ff, o));
  }
  x = affine_layer_norm(x, final_ln_gain_, final_ln_bias_);
  std::vector<std::size_t> rows(b * k);
  for (std::size_t bi = 0; bi < b; ++bi)
    for (std::size_t t = 0; t < k; ++t) rows[bi * k + t] = bi * l + 3 * t + 1;
  return gather_rows(x, std::move(rows), {b, k});
}

Tensor Model::head(const Tensor& states) const {
  Tensor out = linear_forward(head_, states);
  if (config_.action.discrete) return out;
  return scale(tanh(out), config_.action.bound);
}

Tensor Model::forward(const Window& w, const ForwardOptions& o) const {
  TokenizedWindow tw = embed(w);
  Tensor states = config_.variant == Variant::kRadt ? forward_radt(tw, o)
                                                    : forward_dt(tw, o);
  return head(states);
}

Tensor Model::loss(const Tensor& predictions, const Window& w,
                   bool last_position_only) const {
  const std::size_t n = w.batch * w.k, a = config_.action.size;
  if (predictions.numel() != n * a)
    throw DimensionError("loss: predictions " + shape_string(predictions.shape()) +
                         " do not match window " + std::to_string(w.batch) + " x " +
                         std::to_string(w.k));
  std::vector<std::uint8_t> mask(w.pad.real);
  if (last_position_only)
    for (std::size_t i = 0; i < n; ++i) mask[i] = mask[i] && (i % w.k == w.k - 1);
  if (config_.action.discrete) {
    std::vector<int> classes(n);
    for (std::size_t i = 0; i < n; ++i)
      classes[i] = mask[i] ? static_cast<int>(w.actions[i]) : 0;
    return cross_entropy_rows(reshape(predictions, {n, a}), classes, mask);
  }
  return mse_rows(reshape(predictions, {n, a}), w.actions, mask);
}

// ---------------------------------------------------------------------------

std::string Model::summary_json() const {
  nlohmann::ordered_json j;
  IniDocument doc;
  config_.to_ini(doc);
  nlohmann::ordered_json cfg;
  for (const auto& e : doc.entries()) cfg[e.key] = e.value;
  j["config"] = cfg;
  j["config_digest"] = config_.digest();
  j["parameter_count"] = params_.parameter_count();
  nlohmann::ordered_json modules = nlohmann::ordered_json::object();
  for (const auto& [name, t] : params_.entries()) {
    const std::string module = name.substr(0, name.find('.'));
    modules[module].push_back(name);
  }
  j["modules"] = modules;
  return j.dump(2) + "\n";
}

CheckpointHeader checkpoint_header(const Model& model) {
  CheckpointHeader h;
  h.config_text = model.config().canonical_text();
  h.config_digest = fnv1a64(h.config_text);
  h.return_scale = model.return_scale();
  return h;
}

void save_model(const std::string& path, const Model& model) {
  save_checkpoint(path, checkpoint_header(model), model.parameters());
}

Model load_model(const std::string& path) {
  Checkpoint ck = load_checkpoint(path);
  if (fnv1a64(ck.header.config_text) != ck.header.config_digest)
    throw IntegrityError("checkpoint config digest does not match its config text");
  RadtConfig config = RadtConfig::from_ini(IniDocument::parse(ck.header.config_text));
  Model model(config, 0);
  model.set_return_scale(ck.header.return_scale);
  restore_parameters(ck, model.parameters());
  return model;
}

}  // namespace radt
