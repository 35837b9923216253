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

#ifndef RADT_TENSOR_HPP_
#define RADT_TENSOR_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "radt/error.hpp"

namespace radt {

using Shape = std::vector<std::size_t>;
using Rng = std::mt19937_64;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {
struct Node;
}  // namespace detail

// Reverse-mode autodiff tensor. A Tensor is a cheap shared handle: copies
// alias the same storage. 64-bit floats, row-major.
//
// Gradients accumulate: calling backward() twice without zero_grad() sums
// the two contributions into every leaf. Intermediate (non-leaf) gradients
// are reset at the start of each backward pass.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor normal(Shape shape, double stddev, Rng& rng,
                       bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t ndim() const;
  std::size_t numel() const;

  std::span<const double> data() const;
  // Direct write access, for optimizers and perturbation tests. Never call
  // this on a tensor whose graph is still pending a backward pass.
  std::span<double> mutable_data();

  // Empty span when no gradient has been accumulated yet.
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  bool has_grad() const;
  void zero_grad();

  bool requires_grad() const;
  bool is_leaf() const;
  std::uint64_t node_id() const;
  double item() const;

  // New leaf holding a copy of the values, outside any graph.
  Tensor detach() const;

  // Internal access for op implementations.
  detail::Node* node() const { return node_.get(); }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// One recorded op, in creation order. Entries are topologically ordered
// because node ids increase monotonically within a thread.
struct RecordEntry {
  std::string kind;
  std::vector<std::uint64_t> inputs;
  std::uint64_t output = 0;
};

// Every op reachable from a root tensor that participates in gradient flow.
class ComputationRecord {
 public:
  explicit ComputationRecord(const Tensor& root);

  const std::vector<RecordEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  // Re-runs every recorded op from its saved inputs and returns the number
  // of output slots whose recomputed value differs bitwise from the stored
  // one.
  std::size_t replay_mismatches() const;

 private:
  Tensor root_;
  std::vector<RecordEntry> entries_;
  std::vector<detail::Node*> nodes_;
};

void backward(const Tensor& loss);

// ---------------------------------------------------------------------------
// Ops. Broadcasting is limited to scalars and to operands whose shape is a
// trailing suffix of the other operand's shape (bias over a batch).

Tensor matmul(const Tensor& a, const Tensor& b);
// x[... x in] * weight[out x in]^T + bias[out]. `bias` may be undefined.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);
// Batched products over a leading dim: [N x m x k] * [N x k x n].
Tensor bmm(const Tensor& a, const Tensor& b);
// [N x m x k] * [N x n x k]^T.
Tensor bmm_nt(const Tensor& a, const Tensor& b);

// `mask` has the same number of elements as `x`; nonzero marks visible
// slots. Masked outputs are exactly zero.
Tensor softmax_masked(const Tensor& x, std::span<const std::uint8_t> mask);
Tensor layer_norm(const Tensor& x, double eps);

enum class Activation { kIdentity, kGelu, kSilu, kRelu, kTanh };
Activation parse_activation(std::string_view name);
std::string_view activation_name(Activation act);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& x, double c);
Tensor scale(const Tensor& x, double c);
Tensor gelu(const Tensor& x);
Tensor silu(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor activate(Activation act, const Tensor& x);

Tensor concat_last(const Tensor& a, const Tensor& b);
// Treats `x` as rows of its last dim and picks rows by index. The result
// has shape out_leading + [last dim]. Backward scatter-adds.
Tensor gather_rows(const Tensor& x, std::vector<std::size_t> rows,
                   Shape out_leading);
Tensor reshape(const Tensor& x, Shape shape);
// [B x L x H*d] <-> [B*H x L x d].
Tensor split_heads(const Tensor& x, std::size_t n_heads);
Tensor merge_heads(const Tensor& x, std::size_t n_heads);
// Multiplies by a fixed (non-differentiable) mask of the same size.
Tensor mask_multiply(const Tensor& x, std::vector<double> mask);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// Mean over weighted rows of the row-wise mean squared error.
// pred/target: [N x A]; row_weight: N entries in {0,1}.
Tensor mse_rows(const Tensor& pred, std::span<const double> target,
                std::span<const std::uint8_t> row_mask);
// Mean cross-entropy of softmax(logits[N x C]) against class indices over
// unmasked rows.
Tensor cross_entropy_rows(const Tensor& logits, std::span<const int> classes,
                          std::span<const std::uint8_t> row_mask);

// ---------------------------------------------------------------------------
// Finite differences. Compares central differences of `f` at `x` against
// the autodiff gradient slot by slot; returns the max of
// |fd - ad| / max(|ad|, floor).
//
// order 2 is the two-point stencil (f(x+h) - f(x-h)) / 2h. order 4 uses the
// five-point stencil; its O(h^4) truncation allows a larger h, which keeps
// roundoff below the floor on deep graphs where many slots have gradients
// near or below 1e-8.
double finite_diff_check(const std::function<Tensor(const Tensor&)>& f,
                         const Tensor& x, double h = 1e-5,
                         double floor = 1e-8, int order = 2);

// Same check over every listed leaf that `f` closes over.
double finite_diff_check_params(const std::function<Tensor()>& f,
                                std::span<const Tensor> params,
                                double h = 1e-5, double floor = 1e-8,
                                int order = 2);

}  // namespace radt

#endif  // RADT_TENSOR_HPP_
