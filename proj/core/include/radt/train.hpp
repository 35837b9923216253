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

#ifndef RADT_TRAIN_HPP_
#define RADT_TRAIN_HPP_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "radt/config.hpp"
#include "radt/data.hpp"
#include "radt/model.hpp"

namespace radt {

struct TrainConfig {
  std::size_t steps = 10000;
  std::size_t batch_size = 64;
  double base_lr = 1e-4;
  std::size_t warmup_steps = 500;
  bool cosine_decay = false;
  double weight_decay = 1e-4;
  double grad_clip = 0.25;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  // Checkpoint period in steps; 0 checkpoints only at the end.
  std::size_t eval_every = 0;
  bool last_position_only = false;

  void validate() const;
  void to_ini(IniDocument& doc) const;
  // Reads the [train] section; absent keys keep their defaults.
  static TrainConfig from_ini(const IniDocument& doc);
};

// Linear warmup to base_lr, then constant or cosine-decayed to 0 at the
// final step.
double lr_at(const TrainConfig& config, std::size_t step);

double global_grad_norm(const ParameterSet& params);
// Scales every gradient by max_norm / norm when norm exceeds max_norm.
// Returns the applied scale.
double clip_grad_norm(ParameterSet& params, double max_norm);

struct AdamWOptions {
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

// Moment buffers mirror the parameter set. Weight decay is decoupled and
// applies to matrices only; vectors (biases, gains) and scalars are exempt.
struct OptimizerState {
  AdamWOptions options;
  std::vector<std::vector<double>> m, v;
  std::vector<std::uint8_t> decay;
  std::size_t step = 0;

  OptimizerState(const ParameterSet& params, const AdamWOptions& options);
};

// One bias-corrected AdamW update. Parameters without a gradient are
// still decayed.
void adamw_step(OptimizerState& state, ParameterSet& params, double lr);

struct StepMetrics {
  std::size_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
  double grad_norm = 0.0;  // before clipping
};

struct TrainSinks {
  // CSV with header step,lr,loss,grad_norm.
  std::ostream* metrics = nullptr;
  // Called every eval_every steps and once after the final step.
  std::function<void(std::size_t step, const Model& model)> checkpoint;
  std::function<void(const StepMetrics&)> on_step;
};

struct TrainResult {
  std::vector<StepMetrics> history;
};

// Checks that the dataset's env matches the model's state and action spaces.
void check_compatible(const RadtConfig& config, const Dataset& data);

// Sets the model's return scale from the dataset, then runs `steps` updates.
// Throws TrainingError on a non-finite loss.
TrainResult train(Model& model, const Dataset& data, const TrainConfig& config,
                  const TrainSinks& sinks = {});

std::string metrics_csv_header();
std::string metrics_csv_row(const StepMetrics& m);

}  // namespace radt

#endif  // RADT_TRAIN_HPP_
