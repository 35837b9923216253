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

#ifndef RADT_LAYERS_HPP_
#define RADT_LAYERS_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "radt/tensor.hpp"

namespace radt {

// Standard deviation of the generic scaled-normal initializer.
inline constexpr double kInitStd = 0.02;

enum class InitMode { kScaledNormal, kZero };

struct LinearLayer {
  Tensor weight;  // [out x in]
  Tensor bias;    // [out], undefined when the layer has no bias
  InitMode init = InitMode::kScaledNormal;

  std::size_t in_features() const { return weight.dim(1); }
  std::size_t out_features() const { return weight.dim(0); }
};

LinearLayer make_linear(std::size_t in, std::size_t out, InitMode init,
                        Rng& rng, bool with_bias = true);
Tensor linear_forward(const LinearLayer& layer, const Tensor& x);

// Alternating linear / activation stack; no activation after the last layer.
struct MlpHead {
  std::vector<LinearLayer> layers;
  Activation activation = Activation::kSilu;
  bool final_zero_init = false;
};

// `widths` lists every layer boundary, e.g. {D, D, D} is one hidden layer.
MlpHead make_mlp(const std::vector<std::size_t>& widths, Activation activation,
                 bool final_zero_init, Rng& rng);
Tensor mlp_forward(const MlpHead& head, const Tensor& x);

struct EmbeddingTable {
  Tensor table;  // [vocab x D]
  std::size_t vocab() const { return table.dim(0); }
};

EmbeddingTable make_embedding(std::size_t vocab, std::size_t width, Rng& rng);
// Looks up one row per index; result shape is leading + [D].
Tensor embedding_lookup(const EmbeddingTable& emb, std::span<const int> indices,
                        Shape leading);

// Inverted dropout. Identity in eval mode or at rate 0.
Tensor dropout(const Tensor& x, double rate, bool training, Rng& rng);

// Ordered, named parameter registry. Names are unique; order is insertion
// order and defines checkpoint layout.
class ParameterSet {
 public:
  void add(std::string name, Tensor tensor);
  void add_linear(const std::string& prefix, const LinearLayer& layer);
  void add_mlp(const std::string& prefix, const MlpHead& head);

  const Tensor* find(std::string_view name) const;
  std::size_t size() const { return entries_.size(); }
  std::size_t parameter_count() const;
  void zero_grads();

  const std::vector<std::pair<std::string, Tensor>>& entries() const {
    return entries_;
  }
  std::vector<std::string> names() const;

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

// ---------------------------------------------------------------------------
// Checkpoint file.
//
//   magic "RADTCKPT" | u32 version | u64 config digest
//   u32 config text length | config text | f64 return scale
//   u32 record count | records...
//   record: u32 name length | name | u32 rank | u64 dims... | f64 data...
//
// Integers and floats are little-endian.

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointHeader {
  std::uint32_t version = kCheckpointVersion;
  std::uint64_t config_digest = 0;
  std::string config_text;
  double return_scale = 1.0;
};

struct Checkpoint {
  CheckpointHeader header;
  std::vector<std::pair<std::string, Tensor>> records;
};

void write_checkpoint(std::ostream& out, const CheckpointHeader& header,
                      const ParameterSet& params);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::string& path, const CheckpointHeader& header,
                     const ParameterSet& params);
Checkpoint load_checkpoint(const std::string& path);

// Copies every record into the same-named parameter. Names and shapes must
// match exactly.
void restore_parameters(const Checkpoint& ckpt, ParameterSet& params);

// FNV-1a, used for config and dataset digests.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace radt

#endif  // RADT_LAYERS_HPP_
