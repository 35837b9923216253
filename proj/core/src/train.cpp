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


#include "radt/train.hpp"

#include <cmath>
#include <numbers>
#include <ostream>

namespace radt {

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw InvalidArgument("train config: " + m); };
  if (batch_size == 0) fail("batch_size must be >= 1");
  if (warmup_steps > steps) fail("warmup_steps must not exceed steps");
  if (!(base_lr > 0.0) || !std::isfinite(base_lr)) fail("base_lr must be positive");
  if (!(weight_decay >= 0.0)) fail("weight_decay must be >= 0");
  if (!(grad_clip > 0.0)) fail("grad_clip must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    fail("betas must lie in [0, 1)");
  if (!(adam_eps > 0.0)) fail("adam_eps must be positive");
}

void TrainConfig::to_ini(IniDocument& doc) const {
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  doc.set("train", "steps", std::to_string(steps));
  doc.set("train", "batch_size", std::to_string(batch_size));
  doc.set("train", "base_lr", format_double(base_lr));
  doc.set("train", "warmup_steps", std::to_string(warmup_steps));
  doc.set("train", "cosine_decay", b(cosine_decay));
  doc.set("train", "weight_decay", format_double(weight_decay));
  doc.set("train", "grad_clip", format_double(grad_clip));
  doc.set("train", "beta1", format_double(beta1));
  doc.set("train", "beta2", format_double(beta2));
  doc.set("train", "adam_eps", format_double(adam_eps));
  doc.set("train", "seed", std::to_string(seed));
  doc.set("train", "eval_every", std::to_string(eval_every));
  doc.set("train", "last_position_only", b(last_position_only));
}

TrainConfig TrainConfig::from_ini(const IniDocument& doc) {
  doc.expect_keys("train", {"steps", "batch_size", "base_lr", "warmup_steps",
                            "cosine_decay", "weight_decay", "grad_clip", "beta1",
                            "beta2", "adam_eps", "seed", "eval_every",
                            "last_position_only"});
  TrainConfig c;
  c.steps = doc.get_size("train", "steps", c.steps);
  c.batch_size = doc.get_size("train", "batch_size", c.batch_size);
  c.base_lr = doc.get_double("train", "base_lr", c.base_lr);
  c.warmup_steps = doc.get_size("train", "warmup_steps", c.warmup_steps);
  c.cosine_decay = doc.get_bool("train", "cosine_decay", c.cosine_decay);
  c.weight_decay = doc.get_double("train", "weight_decay", c.weight_decay);
  c.grad_clip = doc.get_double("train", "grad_clip", c.grad_clip);
  c.beta1 = doc.get_double("train", "beta1", c.beta1);
  c.beta2 = doc.get_double("train", "beta2", c.beta2);
  c.adam_eps = doc.get_double("train", "adam_eps", c.adam_eps);
  c.seed = doc.get_size("train", "seed", c.seed);
  c.eval_every = doc.get_size("train", "eval_every", c.eval_every);
  c.last_position_only = doc.get_bool("train", "last_position_only", c.last_position_only);
  c.validate();
  return c;
}

double lr_at(const TrainConfig& c, std::size_t step) {
  const double warm =
      c.warmup_steps == 0
          ? 1.0
          : std::min(1.0, static_cast<double>(step + 1) / static_cast<double>(c.warmup_steps));
  if (!c.cosine_decay || step < c.warmup_steps || c.steps <= c.warmup_steps + 1)
    return c.base_lr * warm;
  // Progress runs from 0 just after warmup to 1 at the final step.
  const double span = static_cast<double>(c.steps - 1 - c.warmup_steps);
  const double p = std::min(1.0, static_cast<double>(step - c.warmup_steps) / span);
  return c.base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * p));
}

double global_grad_norm(const ParameterSet& params) {
  double sq = 0.0;
  for (const auto& [name, t] : params.entries()) {
    if (!t.has_grad()) continue;
    for (double g : t.grad()) sq += g * g;
  }
  return std::sqrt(sq);
}

double clip_grad_norm(ParameterSet& params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (!(norm > max_norm)) return 1.0;
  const double s = max_norm / norm;
  for (const auto& [name, t] : params.entries()) {
    if (!t.has_grad()) continue;
    Tensor p = t;
    for (double& g : p.mutable_grad()) g *= s;
  }
  return s;
}

OptimizerState::OptimizerState(const ParameterSet& params, const AdamWOptions& opts)
    : options(opts) {
  for (const auto& [name, t] : params.entries()) {
    m.emplace_back(t.numel(), 0.0);
    v.emplace_back(t.numel(), 0.0);
    decay.push_back(t.ndim() >= 2 ? 1 : 0);
  }
}

void adamw_step(OptimizerState& state, ParameterSet& params, double lr) {
  if (state.m.size() != params.size())
    throw InvalidArgument("adamw_step: optimizer state does not match parameters");
  ++state.step;
  const auto& o = state.options;
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));
  std::size_t i = 0;
  for (const auto& [name, t] : params.entries()) {
    Tensor p = t;
    auto w = p.mutable_data();
    const double keep = state.decay[i] ? 1.0 - lr * o.weight_decay : 1.0;
    if (!p.has_grad()) {
      if (keep != 1.0)
        for (double& x : w) x *= keep;
      ++i;
      continue;
    }
    auto g = p.grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = o.beta1 * m[j] + (1.0 - o.beta1) * g[j];
      v[j] = o.beta2 * v[j] + (1.0 - o.beta2) * g[j] * g[j];
      const double mh = m[j] / c1, vh = v[j] / c2;
      w[j] = w[j] * keep - lr * mh / (std::sqrt(vh) + o.eps);
    }
    ++i;
  }
}

void check_compatible(const RadtConfig& config, const Dataset& data) {
  const EnvSpec& spec = env_spec(data.env);
  if (config.state_dim != spec.state_dim || !(config.action == spec.action))
    throw InvalidArgument("model expects state_dim " + std::to_string(config.state_dim) +
                          " but dataset env '" + spec.name + "' has state_dim " +
                          std::to_string(spec.state_dim) + " or a different action space");
  if (config.max_timesteps < spec.horizon)
    throw InvalidArgument("model max_timesteps " + std::to_string(config.max_timesteps) +
                          " is below the " + spec.name + " horizon " +
                          std::to_string(spec.horizon));
}

std::string metrics_csv_header() { return "step,lr,loss,grad_norm\n"; }

std::string metrics_csv_row(const StepMetrics& m) {
  return std::to_string(m.step) + "," + format_double(m.lr) + "," + format_double(m.loss) +
         "," + format_double(m.grad_norm) + "\n";
}

TrainResult train(Model& model, const Dataset& data, const TrainConfig& config,
                  const TrainSinks& sinks) {
  config.validate();
  check_compatible(model.config(), data);
  model.set_return_scale(data.return_scale);
  ParameterSet& params = model.parameters();
  OptimizerState opt(params, {config.beta1, config.beta2, config.adam_eps,
                              config.weight_decay});
  Rng sample_rng(config.seed);
  Rng dropout_rng(config.seed ^ 0x9e3779b97f4a7c15ull);
  const std::size_t k = model.config().context_length;
  TrainResult result;
  result.history.reserve(config.steps);
  if (sinks.metrics) *sinks.metrics << metrics_csv_header();
  for (std::size_t step = 0; step < config.steps; ++step) {
    Window w = sample_batch(data, k, config.batch_size, sample_rng);
    ForwardOptions fo;
    fo.training = true;
    fo.rng = &dropout_rng;
    Tensor loss = model.loss(model.forward(w, fo), w, config.last_position_only);
    params.zero_grads();
    backward(loss);
    StepMetrics m{step, lr_at(config, step), loss.item(), global_grad_norm(params)};
    if (!std::isfinite(m.loss) || !std::isfinite(m.grad_norm))
      throw TrainingError("non-finite loss at step " + std::to_string(step) + " (lr " +
                          format_double(m.lr) + ", grad norm " + format_double(m.grad_norm) +
                          ", loss " + format_double(m.loss) + ")");
    clip_grad_norm(params, config.grad_clip);
    adamw_step(opt, params, m.lr);
    result.history.push_back(m);
    if (sinks.metrics) *sinks.metrics << metrics_csv_row(m);
    if (sinks.on_step) sinks.on_step(m);
    if (sinks.checkpoint && config.eval_every > 0 && (step + 1) % config.eval_every == 0 &&
        step + 1 != config.steps)
      sinks.checkpoint(step + 1, model);
  }
  if (sinks.checkpoint) sinks.checkpoint(config.steps, model);
  return result;
}

}  // namespace radt
