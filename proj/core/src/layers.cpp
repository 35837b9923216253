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

#include "radt/layers.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_map>

namespace radt {

LinearLayer make_linear(std::size_t in, std::size_t out, InitMode init,
                        Rng& rng, bool with_bias) {
  LinearLayer layer;
  layer.init = init;
  if (init == InitMode::kZero) {
    layer.weight = Tensor::zeros({out, in}, true);
  } else {
    layer.weight = Tensor::normal({out, in}, kInitStd, rng, true);
  }
  if (with_bias) layer.bias = Tensor::zeros({out}, true);
  return layer;
}

Tensor linear_forward(const LinearLayer& layer, const Tensor& x) {
  return linear(x, layer.weight, layer.bias);
}

MlpHead make_mlp(const std::vector<std::size_t>& widths, Activation activation,
                 bool final_zero_init, Rng& rng) {
  if (widths.size() < 2)
    throw InvalidArgument("make_mlp: need at least input and output widths");
  MlpHead head;
  head.activation = activation;
  head.final_zero_init = final_zero_init;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const bool last = i + 2 == widths.size();
    head.layers.push_back(make_linear(
        widths[i], widths[i + 1],
        last && final_zero_init ? InitMode::kZero : InitMode::kScaledNormal,
        rng));
  }
  return head;
}

Tensor mlp_forward(const MlpHead& head, const Tensor& x) {
  Tensor h = x;
  for (std::size_t i = 0; i < head.layers.size(); ++i) {
    h = linear_forward(head.layers[i], h);
    if (i + 1 < head.layers.size()) h = activate(head.activation, h);
  }
  return h;
}

EmbeddingTable make_embedding(std::size_t vocab, std::size_t width, Rng& rng) {
  return EmbeddingTable{Tensor::normal({vocab, width}, kInitStd, rng, true)};
}

Tensor embedding_lookup(const EmbeddingTable& emb, std::span<const int> indices,
                        Shape leading) {
  std::vector<std::size_t> rows(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || static_cast<std::size_t>(indices[i]) >= emb.vocab())
      throw InvalidArgument("embedding index " + std::to_string(indices[i]) +
                            " outside vocabulary of " +
                            std::to_string(emb.vocab()));
    rows[i] = static_cast<std::size_t>(indices[i]);
  }
  return gather_rows(emb.table, std::move(rows), std::move(leading));
}

Tensor dropout(const Tensor& x, double rate, bool training, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw InvalidArgument("dropout rate " + std::to_string(rate) +
                          " outside [0, 1)");
  if (!training || rate == 0.0) return x;
  std::bernoulli_distribution keep(1.0 - rate);
  const double kept = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.numel());
  for (double& m : mask) m = keep(rng) ? kept : 0.0;
  return mask_multiply(x, std::move(mask));
}

// ---------------------------------------------------------------------------

void ParameterSet::add(std::string name, Tensor tensor) {
  if (find(name) != nullptr)
    throw InvalidArgument("duplicate parameter name '" + name + "'");
  entries_.emplace_back(std::move(name), std::move(tensor));
}

void ParameterSet::add_linear(const std::string& prefix,
                              const LinearLayer& layer) {
  add(prefix + ".weight", layer.weight);
  if (layer.bias.defined()) add(prefix + ".bias", layer.bias);
}

void ParameterSet::add_mlp(const std::string& prefix, const MlpHead& head) {
  for (std::size_t i = 0; i < head.layers.size(); ++i)
    add_linear(prefix + "." + std::to_string(i), head.layers[i]);
}

const Tensor* ParameterSet::find(std::string_view name) const {
  for (const auto& [n, t] : entries_)
    if (n == name) return &t;
  return nullptr;
}

std::size_t ParameterSet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : entries_) n += t.numel();
  return n;
}

void ParameterSet::zero_grads() {
  for (auto& [name, t] : entries_) t.zero_grad();
}

std::vector<std::string> ParameterSet::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, t] : entries_) out.push_back(name);
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoint I/O

namespace {

constexpr char kMagic[8] = {'R', 'A', 'D', 'T', 'C', 'K', 'P', 'T'};

template <class T>
void put_le(std::ostream& out, T value) {
  static_assert(std::is_unsigned_v<T>);
  unsigned char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i)
    bytes[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

void put_f64(std::ostream& out, double v) {
  put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
}

template <class T>
T get_le(std::istream& in, const char* what) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T)))
    throw IntegrityError(std::string("checkpoint truncated while reading ") +
                         what);
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    value |= static_cast<T>(bytes[i]) << (8 * i);
  return value;
}

double get_f64(std::istream& in, const char* what) {
  return std::bit_cast<double>(get_le<std::uint64_t>(in, what));
}

std::string get_string(std::istream& in, std::uint32_t len, const char* what) {
  std::string s(len, '\0');
  if (len && !in.read(s.data(), len))
    throw IntegrityError(std::string("checkpoint truncated while reading ") +
                         what);
  return s;
}

}  // namespace

void write_checkpoint(std::ostream& out, const CheckpointHeader& header,
                      const ParameterSet& params) {
  out.write(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, header.version);
  put_le<std::uint64_t>(out, header.config_digest);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(header.config_text.size()));
  out.write(header.config_text.data(),
            static_cast<std::streamsize>(header.config_text.size()));
  put_f64(out, header.return_scale);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, t] : params.entries()) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.ndim()));
    for (std::size_t d : t.shape()) put_le<std::uint64_t>(out, d);
    for (double v : t.data()) put_f64(out, v);
  }
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[8];
  if (!in.read(magic, sizeof(magic)) ||
      std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw IntegrityError("not a checkpoint file (bad magic)");
  Checkpoint ck;
  ck.header.version = get_le<std::uint32_t>(in, "version");
  if (ck.header.version != kCheckpointVersion)
    throw IntegrityError("unsupported checkpoint version " +
                         std::to_string(ck.header.version));
  ck.header.config_digest = get_le<std::uint64_t>(in, "config digest");
  const auto text_len = get_le<std::uint32_t>(in, "config length");
  ck.header.config_text = get_string(in, text_len, "config text");
  ck.header.return_scale = get_f64(in, "return scale");
  const auto count = get_le<std::uint32_t>(in, "record count");
  for (std::uint32_t r = 0; r < count; ++r) {
    const auto name_len = get_le<std::uint32_t>(in, "name length");
    std::string name = get_string(in, name_len, "name");
    const auto rank = get_le<std::uint32_t>(in, "rank");
    if (rank > 8) throw IntegrityError("implausible rank for " + name);
    Shape shape(rank);
    for (auto& d : shape) d = get_le<std::uint64_t>(in, "dims");
    std::vector<double> values(shape_numel(shape));
    for (double& v : values) v = get_f64(in, "parameter data");
    ck.records.emplace_back(std::move(name),
                            Tensor::from(std::move(shape), std::move(values)));
  }
  if (in.peek() != std::char_traits<char>::eof())
    throw IntegrityError("trailing bytes after checkpoint records");
  return ck;
}

void save_checkpoint(const std::string& path, const CheckpointHeader& header,
                     const ParameterSet& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint '" + path + "'");
  write_checkpoint(out, header, params);
  if (!out) throw Error("failed while writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint '" + path + "'");
  return read_checkpoint(in);
}

void restore_parameters(const Checkpoint& ckpt, ParameterSet& params) {
  if (ckpt.records.size() != params.size())
    throw IntegrityError("checkpoint has " +
                         std::to_string(ckpt.records.size()) +
                         " parameters, model expects " +
                         std::to_string(params.size()));
  for (const auto& [name, t] : ckpt.records) {
    const Tensor* target = params.find(name);
    if (target == nullptr)
      throw IntegrityError("checkpoint parameter '" + name +
                           "' not present in model");
    if (target->shape() != t.shape())
      throw IntegrityError("checkpoint parameter '" + name + "' has shape " +
                           shape_string(t.shape()) + ", model expects " +
                           shape_string(target->shape()));
    Tensor dst = *target;
    auto out = dst.mutable_data();
    std::copy(t.data().begin(), t.data().end(), out.begin());
  }
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace radt
