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

#include "radt/tensor.hpp"

#if defined(__AVX2__) || defined(__AVX512F__)
#include <immintrin.h>
#endif

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>
#include <unordered_set>
#include <utility>

namespace radt {

// Cubic coefficient of the tanh approximation of GELU.
inline constexpr double kGeluCubic = 0.044715;

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace detail {

struct Node;

class Function {
 public:
  virtual ~Function() = default;
  virtual std::string_view kind() const = 0;
  virtual void forward(std::span<double> out) const = 0;
  virtual void backward(const Node& out) = 0;

  std::vector<Tensor> inputs;
};

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  std::uint64_t id = 0;
  std::unique_ptr<Function> fn;
};

namespace {

std::uint64_t next_node_id() {
  thread_local std::uint64_t counter = 0;
  return ++counter;
}

}  // namespace

std::shared_ptr<Node> new_node(Shape shape) {
  auto node = std::make_shared<Node>();
  node->data.assign(shape_numel(shape), 0.0);
  node->shape = std::move(shape);
  node->id = next_node_id();
  return node;
}

// Gradient buffer of an input, allocated on first use. Returns an empty
// span for inputs that do not take part in gradient flow.
std::span<double> grad_of(const Tensor& t) {
  Node* n = t.node();
  if (!n->requires_grad) return {};
  if (n->grad.empty()) n->grad.assign(n->data.size(), 0.0);
  return n->grad;
}

}  // namespace detail

using detail::Function;
using detail::Node;

namespace {

Tensor make_op(Shape shape, std::unique_ptr<Function> fn) {
  auto node = detail::new_node(std::move(shape));
  fn->forward(node->data);
  bool needs_grad = false;
  for (const Tensor& in : fn->inputs) needs_grad |= in.requires_grad();
  if (needs_grad) {
    node->requires_grad = true;
    node->fn = std::move(fn);
  }
  return Tensor(std::move(node));
}

void require(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

void require_defined(const Tensor& t, std::string_view op) {
  if (!t.defined()) throw InvalidArgument(std::string(op) + ": undefined tensor");
}

std::size_t last_dim(const Tensor& t) {
  return t.ndim() == 0 ? 1 : t.shape().back();
}

bool is_scalar_shape(const Tensor& t) { return t.numel() == 1; }

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

// ---------------------------------------------------------------------------
// Dense kernels. Every output element is updated as c = fma(a_p, b_p, c) for
// p = 0, 1, ... in order, on every code path (vector body, column tail, row
// tail). An element's value therefore depends only on its own operands, never
// on its row, batch or column position.

#if defined(__AVX512F__)
using Vec = __m512d;
constexpr std::size_t kLanes = 8;
inline Vec vload(const double* p) { return _mm512_loadu_pd(p); }
inline void vstore(double* p, Vec v) { _mm512_storeu_pd(p, v); }
inline Vec vbroadcast(double x) { return _mm512_set1_pd(x); }
inline Vec vfma(Vec a, Vec b, Vec c) { return _mm512_fmadd_pd(a, b, c); }
#elif defined(__AVX2__) && defined(__FMA__)
using Vec = __m256d;
constexpr std::size_t kLanes = 4;
inline Vec vload(const double* p) { return _mm256_loadu_pd(p); }
inline void vstore(double* p, Vec v) { _mm256_storeu_pd(p, v); }
inline Vec vbroadcast(double x) { return _mm256_set1_pd(x); }
inline Vec vfma(Vec a, Vec b, Vec c) { return _mm256_fmadd_pd(a, b, c); }
#else
#define RADT_SCALAR_GEMM 1
#endif

// C[m x n] += A * B[k x n], where A(i, p) = a[i * rs + p * ps].
void gemm_core(const double* a, std::size_t rs, std::size_t ps, const double* b,
               double* c, std::size_t m, std::size_t k, std::size_t n) {
  std::size_t j0 = 0;
#ifndef RADT_SCALAR_GEMM
  constexpr std::size_t kRows = 4;
  constexpr std::size_t kCols = 2 * kLanes;
  for (; j0 + kCols <= n; j0 += kCols) {
    std::size_t i = 0;
    for (; i + kRows <= m; i += kRows) {
      Vec acc[kRows][2];
      for (std::size_t r = 0; r < kRows; ++r) {
        acc[r][0] = vload(c + (i + r) * n + j0);
        acc[r][1] = vload(c + (i + r) * n + j0 + kLanes);
      }
      for (std::size_t p = 0; p < k; ++p) {
        const Vec b0 = vload(b + p * n + j0);
        const Vec b1 = vload(b + p * n + j0 + kLanes);
        for (std::size_t r = 0; r < kRows; ++r) {
          const Vec av = vbroadcast(a[(i + r) * rs + p * ps]);
          acc[r][0] = vfma(av, b0, acc[r][0]);
          acc[r][1] = vfma(av, b1, acc[r][1]);
        }
      }
      for (std::size_t r = 0; r < kRows; ++r) {
        vstore(c + (i + r) * n + j0, acc[r][0]);
        vstore(c + (i + r) * n + j0 + kLanes, acc[r][1]);
      }
    }
    for (; i < m; ++i) {
      Vec acc0 = vload(c + i * n + j0), acc1 = vload(c + i * n + j0 + kLanes);
      for (std::size_t p = 0; p < k; ++p) {
        const Vec av = vbroadcast(a[i * rs + p * ps]);
        acc0 = vfma(av, vload(b + p * n + j0), acc0);
        acc1 = vfma(av, vload(b + p * n + j0 + kLanes), acc1);
      }
      vstore(c + i * n + j0, acc0);
      vstore(c + i * n + j0 + kLanes, acc1);
    }
  }
  for (; j0 + kLanes <= n; j0 += kLanes) {
    for (std::size_t i = 0; i < m; ++i) {
      Vec acc = vload(c + i * n + j0);
      for (std::size_t p = 0; p < k; ++p)
        acc = vfma(vbroadcast(a[i * rs + p * ps]), vload(b + p * n + j0), acc);
      vstore(c + i * n + j0, acc);
    }
  }
#endif
  if (j0 == n) return;
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * rs + p * ps];
      const double* brow = b + p * n;
      for (std::size_t j = j0; j < n; ++j) crow[j] = std::fma(av, brow[j], crow[j]);
    }
  }
}

// C[m x n] += A[m x k] * B[k x n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n) {
  gemm_core(a, k, 1, b, c, m, k, n);
}

// C[m x n] += A[m x k] * B[n x k]^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n) {
  thread_local std::vector<double> bt;
  bt.resize(k * n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
  gemm_core(a, k, 1, bt.data(), c, m, k, n);
}

// C[k x n] += A[m x k]^T * B[m x n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n) {
  gemm_core(a, 1, k, b, c, k, m, n);
}

// ---------------------------------------------------------------------------

class MatmulFn final : public Function {
 public:
  std::size_t m, k, n;
  std::string_view kind() const override { return "matmul"; }
  void forward(std::span<double> out) const override {
    std::fill(out.begin(), out.end(), 0.0);
    gemm_nn(inputs[0].data().data(), inputs[1].data().data(), out.data(), m, k,
            n);
  }
  void backward(const Node& out) override {
    auto ga = detail::grad_of(inputs[0]);
    auto gb = detail::grad_of(inputs[1]);
    if (!ga.empty())
      gemm_nt(out.grad.data(), inputs[1].data().data(), ga.data(), m, n, k);
    if (!gb.empty())
      gemm_tn(inputs[0].data().data(), out.grad.data(), gb.data(), m, k, n);
  }
};

class LinearFn final : public Function {
 public:
  std::size_t rows, in, out_dim;
  bool has_bias;
  std::string_view kind() const override { return "linear"; }
  void forward(std::span<double> out) const override {
    const double* w = inputs[1].data().data();
    std::vector<double> wt(in * out_dim);
    for (std::size_t o = 0; o < out_dim; ++o)
      for (std::size_t i = 0; i < in; ++i) wt[i * out_dim + o] = w[o * in + i];
    if (has_bias) {
      const double* b = inputs[2].data().data();
      for (std::size_t r = 0; r < rows; ++r)
        std::copy(b, b + out_dim, out.data() + r * out_dim);
    } else {
      std::fill(out.begin(), out.end(), 0.0);
    }
    gemm_nn(inputs[0].data().data(), wt.data(), out.data(), rows, in, out_dim);
  }
  void backward(const Node& out) override {
    const double* g = out.grad.data();
    auto gx = detail::grad_of(inputs[0]);
    auto gw = detail::grad_of(inputs[1]);
    if (!gx.empty())
      gemm_nn(g, inputs[1].data().data(), gx.data(), rows, out_dim, in);
    if (!gw.empty())
      gemm_tn(g, inputs[0].data().data(), gw.data(), rows, out_dim, in);
    if (has_bias) {
      auto gb = detail::grad_of(inputs[2]);
      if (!gb.empty())
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t o = 0; o < out_dim; ++o) gb[o] += g[r * out_dim + o];
    }
  }
};

class BmmFn final : public Function {
 public:
  std::size_t batch, m, k, n;
  bool transpose_b;
  std::string_view kind() const override {
    return transpose_b ? "bmm_nt" : "bmm";
  }
  void forward(std::span<double> out) const override {
    std::fill(out.begin(), out.end(), 0.0);
    const double* a = inputs[0].data().data();
    const double* b = inputs[1].data().data();
    for (std::size_t s = 0; s < batch; ++s) {
      if (transpose_b)
        gemm_nt(a + s * m * k, b + s * n * k, out.data() + s * m * n, m, k, n);
      else
        gemm_nn(a + s * m * k, b + s * k * n, out.data() + s * m * n, m, k, n);
    }
  }
  void backward(const Node& out) override {
    auto ga = detail::grad_of(inputs[0]);
    auto gb = detail::grad_of(inputs[1]);
    const double* a = inputs[0].data().data();
    const double* b = inputs[1].data().data();
    const double* g = out.grad.data();
    for (std::size_t s = 0; s < batch; ++s) {
      const double* gs = g + s * m * n;
      if (!ga.empty()) {
        // dA = dC * B^T (or dC * B when B was transposed)
        if (transpose_b)
          gemm_nn(gs, b + s * n * k, ga.data() + s * m * k, m, n, k);
        else
          gemm_nt(gs, b + s * k * n, ga.data() + s * m * k, m, n, k);
      }
      if (!gb.empty()) {
        if (transpose_b)  // dB[n x k] = dC^T * A
          gemm_tn(gs, a + s * m * k, gb.data() + s * n * k, m, n, k);
        else  // dB[k x n] = A^T * dC
          gemm_tn(a + s * m * k, gs, gb.data() + s * k * n, m, k, n);
      }
    }
  }
};

class SoftmaxMaskedFn final : public Function {
 public:
  std::vector<std::uint8_t> mask;
  std::size_t width;
  std::string_view kind() const override { return "softmax_masked"; }
  void forward(std::span<double> out) const override {
    const double* x = inputs[0].data().data();
    const std::size_t rows = out.size() / width;
    for (std::size_t r = 0; r < rows; ++r) {
      const double* xr = x + r * width;
      const std::uint8_t* mr = mask.data() + r * width;
      double* yr = out.data() + r * width;
      double mx = -INFINITY;
      bool any = false;
      for (std::size_t j = 0; j < width; ++j)
        if (mr[j]) {
          mx = any ? std::max(mx, xr[j]) : xr[j];
          any = true;
        }
      if (!any)
        throw InvalidMaskError("softmax_masked: row " + std::to_string(r) +
                               " is fully masked");
      double total = 0.0;
      for (std::size_t j = 0; j < width; ++j) {
        if (mr[j]) {
          yr[j] = std::exp(xr[j] - mx);
          total += yr[j];
        } else {
          yr[j] = 0.0;
        }
      }
      for (std::size_t j = 0; j < width; ++j)
        if (mr[j]) yr[j] /= total;
    }
  }
  void backward(const Node& out) override {
    auto gx = detail::grad_of(inputs[0]);
    if (gx.empty()) return;
    const std::size_t rows = out.data.size() / width;
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = out.data.data() + r * width;
      const double* g = out.grad.data() + r * width;
      const std::uint8_t* mr = mask.data() + r * width;
      double dot = 0.0;
      for (std::size_t j = 0; j < width; ++j)
        if (mr[j]) dot += y[j] * g[j];
      for (std::size_t j = 0; j < width; ++j)
        if (mr[j]) gx[r * width + j] += y[j] * (g[j] - dot);
    }
  }
};

class LayerNormFn final : public Function {
 public:
  std::size_t width;
  double eps;
  std::string_view kind() const override { return "layer_norm"; }

  void row_stats(const double* x, double& mu, double& rstd) const {
    double s = 0.0;
    for (std::size_t j = 0; j < width; ++j) s += x[j];
    mu = s / static_cast<double>(width);
    double v = 0.0;
    for (std::size_t j = 0; j < width; ++j) v += (x[j] - mu) * (x[j] - mu);
    v /= static_cast<double>(width);
    rstd = 1.0 / std::sqrt(v + eps);
  }
  void forward(std::span<double> out) const override {
    const double* x = inputs[0].data().data();
    const std::size_t rows = out.size() / width;
    for (std::size_t r = 0; r < rows; ++r) {
      double mu, rstd;
      row_stats(x + r * width, mu, rstd);
      for (std::size_t j = 0; j < width; ++j)
        out[r * width + j] = (x[r * width + j] - mu) * rstd;
    }
  }
  void backward(const Node& out) override {
    auto gx = detail::grad_of(inputs[0]);
    if (gx.empty()) return;
    const double* x = inputs[0].data().data();
    const std::size_t rows = out.data.size() / width;
    const double inv_w = 1.0 / static_cast<double>(width);
    for (std::size_t r = 0; r < rows; ++r) {
      double mu, rstd;
      row_stats(x + r * width, mu, rstd);
      const double* y = out.data.data() + r * width;
      const double* g = out.grad.data() + r * width;
      double gsum = 0.0, gy = 0.0;
      for (std::size_t j = 0; j < width; ++j) {
        gsum += g[j];
        gy += g[j] * y[j];
      }
      gsum *= inv_w;
      gy *= inv_w;
      for (std::size_t j = 0; j < width; ++j)
        gx[r * width + j] += rstd * (g[j] - gsum - y[j] * gy);
    }
  }
};

enum class BinaryKind { kAdd, kSub, kMul };

class BinaryFn final : public Function {
 public:
  BinaryKind op;
  // Index of the operand that repeats (0 or 1), or -1 when shapes match.
  int small = -1;
  std::string_view kind() const override {
    switch (op) {
      case BinaryKind::kAdd: return "add";
      case BinaryKind::kSub: return "sub";
      case BinaryKind::kMul: return "hadamard";
    }
    return "binary";
  }
  // Calls f(i, ia, ib) for every output slot i, where the repeated operand
  // is indexed by position within its suffix block.
  template <class F>
  static void each(std::size_t n, std::size_t na, std::size_t nb, F&& f) {
    if (na == n && nb == n) {
      for (std::size_t i = 0; i < n; ++i) f(i, i, i);
    } else if (na == n) {
      for (std::size_t base = 0; base < n; base += nb)
        for (std::size_t j = 0; j < nb; ++j) f(base + j, base + j, j);
    } else {
      for (std::size_t base = 0; base < n; base += na)
        for (std::size_t j = 0; j < na; ++j) f(base + j, j, base + j);
    }
  }
  void forward(std::span<double> out) const override {
    const double* a = inputs[0].data().data();
    const double* b = inputs[1].data().data();
    const std::size_t na = inputs[0].numel(), nb = inputs[1].numel();
    double* o = out.data();
    switch (op) {
      case BinaryKind::kAdd:
        each(out.size(), na, nb, [&](auto i, auto ia, auto ib) { o[i] = a[ia] + b[ib]; });
        break;
      case BinaryKind::kSub:
        each(out.size(), na, nb, [&](auto i, auto ia, auto ib) { o[i] = a[ia] - b[ib]; });
        break;
      case BinaryKind::kMul:
        each(out.size(), na, nb, [&](auto i, auto ia, auto ib) { o[i] = a[ia] * b[ib]; });
        break;
    }
  }
  void backward(const Node& out) override {
    auto ga = detail::grad_of(inputs[0]);
    auto gb = detail::grad_of(inputs[1]);
    const double* a = inputs[0].data().data();
    const double* b = inputs[1].data().data();
    const std::size_t na = inputs[0].numel(), nb = inputs[1].numel();
    const std::size_t n = out.data.size();
    const double* g = out.grad.data();
    const double sign = op == BinaryKind::kSub ? -1.0 : 1.0;
    if (op == BinaryKind::kMul) {
      if (!ga.empty())
        each(n, na, nb, [&](auto i, auto ia, auto ib) { ga[ia] += g[i] * b[ib]; });
      if (!gb.empty())
        each(n, na, nb, [&](auto i, auto ia, auto ib) { gb[ib] += g[i] * a[ia]; });
      return;
    }
    if (!ga.empty()) each(n, na, nb, [&](auto i, auto ia, auto) { ga[ia] += g[i]; });
    if (!gb.empty())
      each(n, na, nb, [&](auto i, auto, auto ib) { gb[ib] += sign * g[i]; });
  }
};

class AffineScalarFn final : public Function {
 public:
  double mul = 1.0, add = 0.0;
  std::string_view kind() const override {
    return mul == 1.0 ? "add_scalar" : "scale";
  }
  void forward(std::span<double> out) const override {
    const auto x = inputs[0].data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * mul + add;
  }
  void backward(const Node& out) override {
    auto gx = detail::grad_of(inputs[0]);
    if (gx.empty()) return;
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += out.grad[i] * mul;
  }
};

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

constexpr double kSqrt2OverPi = 0.79788456080286535588;

class UnaryFn final : public Function {
 public:
  Activation act;
  std::string_view kind() const override { return activation_name(act); }
  static double value(Activation act, double x) {
    switch (act) {
      case Activation::kIdentity: return x;
      case Activation::kGelu:
        return 0.5 * x *
               (1.0 + std::tanh(kSqrt2OverPi * (x + kGeluCubic * x * x * x)));
      case Activation::kSilu: return x * sigmoid(x);
      case Activation::kRelu: return x > 0.0 ? x : 0.0;
      case Activation::kTanh: return std::tanh(x);
    }
    return x;
  }
  static double derivative(Activation act, double x, double y) {
    switch (act) {
      case Activation::kIdentity: return 1.0;
      case Activation::kGelu: {
        const double u = kSqrt2OverPi * (x + kGeluCubic * x * x * x);
        const double t = std::tanh(u);
        const double du = kSqrt2OverPi * (1.0 + 3.0 * kGeluCubic * x * x);
        return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
      }
      case Activation::kSilu: {
        const double s = sigmoid(x);
        return s * (1.0 + x * (1.0 - s));
      }
      case Activation::kRelu: return x > 0.0 ? 1.0 : 0.0;
      case Activation::kTanh: return 1.0 - y * y;
    }
    return 1.0;
  }
  void forward(std::span<double> out) const override {
    const auto x = inputs[0].data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = value(act, x[i]);
  }
  void backward(const Node& out) override {
    auto gx = detail::grad_of(inputs[0]);
    if (gx.empty()) return;
    const auto x = inputs[0].data();
    for (std::size_t i = 0; i < gx.size(); ++i)
      gx[i] += out.grad[i] * derivative(act, x[i], out.data[i]);
  }
};

class ConcatLastFn final : public Function {
 public:
  std::size_t rows, da, db;
  std::string_view kind() const override { return "concat_last"; }
  void forward(std::span<double> out) const override {
    const double* a = inputs[0].data().data();
    const double* b = inputs[1].data().data();
    const std::size_t w = da + db;
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy(a + r * da, a + (r + 1) * da, out.data() + r * w);
      std::copy(b + r * db, b + (r + 1) * db, out.data() + r * w + da);
    }
  }
  void backward(const Node& out) override {
    auto ga = detail::grad_of(inputs[0]);
    auto gb = detail::grad_of(inputs[1]);
    const std::size_t w = da + db;
    for (std::size_t r = 0; r < rows; ++r) {
      const double* g = out.grad.data() + r * w;
      if (!ga.empty())
        for (std::size_t j = 0; j < da; ++j) ga[r * da + j] += g[j];
      if (!gb.empty())
        for (std::size_t j = 0; j < db; ++j) gb[r * db + j] += g[da + j];
    }
  }
};

class GatherRowsFn final : public Function {
 public:
  std::vector<std::size_t> rows;
  std::size_t width;
  std::string_view kind() const override { return "gather_rows"; }
  void forward(std::span<double> out) const override {
    const double* x = inputs[0].data().data();
    for (std::size_t r = 0; r < rows.size(); ++r)
      std::copy(x + rows[r] * width, x + (rows[r] + 1) * width,
                out.data() + r * width);
  }
  void backward(const Node& out) override {
    auto gx = detail::grad_of(inputs[0]);
    if (gx.empty()) return;
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t j = 0; j < width; ++j)
        gx[rows[r] * width + j] += out.grad[r * width + j];
  }
};

class CopyFn final : public Function {
 public:
  std::string_view kind() const override { return "reshape"; }
  void forward(std::span<double> out) const override {
    const auto x = inputs[0].data();
    std::copy(x.begin(), x.end(), out.begin());
  }
  void backward(const Node& out) override {
    auto gx = detail::grad_of(inputs[0]);
    if (gx.empty()) return;
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += out.grad[i];
  }
};

class HeadsFn final : public Function {
 public:
  std::size_t b, l, h, d;
  bool split;
  std::string_view kind() const override {
    return split ? "split_heads" : "merge_heads";
  }
  // Index into the merged layout [B x L x H*d] for a split-layout element.
  std::size_t merged_index(std::size_t bi, std::size_t hi, std::size_t li,
                           std::size_t di) const {
    return (bi * l + li) * h * d + hi * d + di;
  }
  std::size_t split_index(std::size_t bi, std::size_t hi, std::size_t li,
                          std::size_t di) const {
    return ((bi * h + hi) * l + li) * d + di;
  }
  template <class F>
  void each(F&& f) const {
    for (std::size_t bi = 0; bi < b; ++bi)
      for (std::size_t hi = 0; hi < h; ++hi)
        for (std::size_t li = 0; li < l; ++li)
          for (std::size_t di = 0; di < d; ++di)
            f(merged_index(bi, hi, li, di), split_index(bi, hi, li, di));
  }
  void forward(std::span<double> out) const override {
    const auto x = inputs[0].data();
    each([&](std::size_t m, std::size_t s) {
      if (split)
        out[s] = x[m];
      else
        out[m] = x[s];
    });
  }
  void backward(const Node& out) override {
    auto gx = detail::grad_of(inputs[0]);
    if (gx.empty()) return;
    each([&](std::size_t m, std::size_t s) {
      if (split)
        gx[m] += out.grad[s];
      else
        gx[s] += out.grad[m];
    });
  }
};

class MaskMultiplyFn final : public Function {
 public:
  std::vector<double> mask;
  std::string_view kind() const override { return "mask_multiply"; }
  void forward(std::span<double> out) const override {
    const auto x = inputs[0].data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * mask[i];
  }
  void backward(const Node& out) override {
    auto gx = detail::grad_of(inputs[0]);
    if (gx.empty()) return;
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += out.grad[i] * mask[i];
  }
};

class SumFn final : public Function {
 public:
  double factor = 1.0;
  std::string_view kind() const override {
    return factor == 1.0 ? "sum" : "mean";
  }
  void forward(std::span<double> out) const override {
    double s = 0.0;
    for (double v : inputs[0].data()) s += v;
    out[0] = s * factor;
  }
  void backward(const Node& out) override {
    auto gx = detail::grad_of(inputs[0]);
    for (double& g : gx) g += out.grad[0] * factor;
  }
};

class MseRowsFn final : public Function {
 public:
  std::vector<double> target;
  std::vector<std::uint8_t> row_mask;
  std::size_t width;
  double active = 0;
  std::string_view kind() const override { return "mse_rows"; }
  void forward(std::span<double> out) const override {
    const auto p = inputs[0].data();
    double total = 0.0;
    for (std::size_t r = 0; r < row_mask.size(); ++r) {
      if (!row_mask[r]) continue;
      double row = 0.0;
      for (std::size_t j = 0; j < width; ++j) {
        const double e = p[r * width + j] - target[r * width + j];
        row += e * e;
      }
      total += row / static_cast<double>(width);
    }
    out[0] = total / active;
  }
  void backward(const Node& out) override {
    auto gp = detail::grad_of(inputs[0]);
    if (gp.empty()) return;
    const auto p = inputs[0].data();
    const double c = out.grad[0] * 2.0 / (active * static_cast<double>(width));
    for (std::size_t r = 0; r < row_mask.size(); ++r) {
      if (!row_mask[r]) continue;
      for (std::size_t j = 0; j < width; ++j)
        gp[r * width + j] += c * (p[r * width + j] - target[r * width + j]);
    }
  }
};

class CrossEntropyRowsFn final : public Function {
 public:
  std::vector<int> classes;
  std::vector<std::uint8_t> row_mask;
  std::size_t width;
  double active = 0;
  std::string_view kind() const override { return "cross_entropy_rows"; }
  void probs(const double* x, std::vector<double>& p) const {
    double mx = x[0];
    for (std::size_t j = 1; j < width; ++j) mx = std::max(mx, x[j]);
    double s = 0.0;
    for (std::size_t j = 0; j < width; ++j) {
      p[j] = std::exp(x[j] - mx);
      s += p[j];
    }
    for (std::size_t j = 0; j < width; ++j) p[j] /= s;
  }
  void forward(std::span<double> out) const override {
    const auto x = inputs[0].data();
    double total = 0.0;
    for (std::size_t r = 0; r < row_mask.size(); ++r) {
      if (!row_mask[r]) continue;
      const double* xr = x.data() + r * width;
      double mx = xr[0];
      for (std::size_t j = 1; j < width; ++j) mx = std::max(mx, xr[j]);
      double s = 0.0;
      for (std::size_t j = 0; j < width; ++j) s += std::exp(xr[j] - mx);
      total += (mx + std::log(s)) - xr[classes[r]];
    }
    out[0] = total / active;
  }
  void backward(const Node& out) override {
    auto gx = detail::grad_of(inputs[0]);
    if (gx.empty()) return;
    const auto x = inputs[0].data();
    std::vector<double> p(width);
    const double c = out.grad[0] / active;
    for (std::size_t r = 0; r < row_mask.size(); ++r) {
      if (!row_mask[r]) continue;
      probs(x.data() + r * width, p);
      for (std::size_t j = 0; j < width; ++j) {
        const double onehot = static_cast<int>(j) == classes[r] ? 1.0 : 0.0;
        gx[r * width + j] += c * (p[j] - onehot);
      }
    }
  }
};

Tensor binary(BinaryKind op, const Tensor& a, const Tensor& b) {
  require_defined(a, "binary op");
  require_defined(b, "binary op");
  auto fn = std::make_unique<BinaryFn>();
  fn->op = op;
  Shape out;
  if (a.shape() == b.shape() ||
      (a.numel() == b.numel() && is_scalar_shape(a))) {
    out = a.shape().size() >= b.shape().size() ? a.shape() : b.shape();
  } else if (is_scalar_shape(b) || is_suffix(b.shape(), a.shape())) {
    out = a.shape();
  } else if (is_scalar_shape(a) || is_suffix(a.shape(), b.shape())) {
    out = b.shape();
  } else {
    throw DimensionError("incompatible shapes " + shape_string(a.shape()) +
                         " and " + shape_string(b.shape()));
  }
  fn->inputs = {a, b};
  return make_op(std::move(out), std::move(fn));
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto node = detail::new_node(std::move(shape));
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  std::fill(t.node_->data.begin(), t.node_->data.end(), value);
  return t;
}

Tensor Tensor::from(Shape shape, std::vector<double> values,
                    bool requires_grad) {
  if (shape_numel(shape) != values.size())
    throw DimensionError("shape " + shape_string(shape) + " needs " +
                         std::to_string(shape_numel(shape)) + " values, got " +
                         std::to_string(values.size()));
  auto node = detail::new_node(std::move(shape));
  node->data = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({}, {value}, requires_grad);
}

Tensor Tensor::normal(Shape shape, double stddev, Rng& rng,
                      bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : t.node_->data) v = dist(rng);
  return t;
}

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::dim(std::size_t axis) const { return node_->shape.at(axis); }
std::size_t Tensor::ndim() const { return node_->shape.size(); }
std::size_t Tensor::numel() const { return node_->data.size(); }
std::span<const double> Tensor::data() const { return node_->data; }
std::span<double> Tensor::mutable_data() { return node_->data; }
std::span<const double> Tensor::grad() const { return node_->grad; }

std::span<double> Tensor::mutable_grad() {
  if (node_->grad.empty()) node_->grad.assign(node_->data.size(), 0.0);
  return node_->grad;
}

bool Tensor::has_grad() const { return !node_->grad.empty(); }

void Tensor::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

bool Tensor::requires_grad() const { return node_->requires_grad; }
bool Tensor::is_leaf() const { return node_->fn == nullptr; }
std::uint64_t Tensor::node_id() const { return node_->id; }

double Tensor::item() const {
  if (numel() != 1)
    throw DimensionError("item() on tensor of shape " + shape_string(shape()));
  return node_->data[0];
}

Tensor Tensor::detach() const {
  return from(node_->shape, node_->data, false);
}

// ---------------------------------------------------------------------------
// Record and backward

namespace {

std::vector<Node*> reachable(const Tensor& root) {
  std::vector<Node*> out;
  std::unordered_set<const Node*> seen;
  std::vector<Node*> stack{root.node()};
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    if (!n->requires_grad || !seen.insert(n).second) continue;
    if (n->fn)
      for (const Tensor& in : n->fn->inputs) stack.push_back(in.node());
    out.push_back(n);
  }
  return out;
}

void sort_by_id(std::vector<Node*>& nodes, bool descending) {
  std::sort(nodes.begin(), nodes.end(), [descending](const Node* a, const Node* b) {
    return descending ? a->id > b->id : a->id < b->id;
  });
}

}  // namespace

ComputationRecord::ComputationRecord(const Tensor& root) : root_(root) {
  require_defined(root, "ComputationRecord");
  nodes_ = reachable(root);
  sort_by_id(nodes_, false);
  for (const Node* n : nodes_) {
    if (!n->fn) continue;
    RecordEntry e;
    e.kind = std::string(n->fn->kind());
    for (const Tensor& in : n->fn->inputs) e.inputs.push_back(in.node_id());
    e.output = n->id;
    entries_.push_back(std::move(e));
  }
}

std::size_t ComputationRecord::replay_mismatches() const {
  std::size_t bad = 0;
  for (const Node* n : nodes_) {
    if (!n->fn) continue;
    std::vector<double> again(n->data.size());
    n->fn->forward(again);
    for (std::size_t i = 0; i < again.size(); ++i)
      if (std::memcmp(&again[i], &n->data[i], sizeof(double)) != 0) ++bad;
  }
  return bad;
}

void backward(const Tensor& loss) {
  require_defined(loss, "backward");
  if (loss.numel() != 1)
    throw DimensionError("backward needs a scalar loss, got shape " +
                         shape_string(loss.shape()));
  if (!loss.requires_grad()) return;
  auto nodes = reachable(loss);
  sort_by_id(nodes, true);
  for (Node* n : nodes)
    if (n->fn) n->grad.assign(n->data.size(), 0.0);
  Node* root = loss.node();
  if (root->grad.empty()) root->grad.assign(1, 0.0);
  root->grad[0] += 1.0;
  for (Node* n : nodes)
    if (n->fn) n->fn->backward(*n);
}

// ---------------------------------------------------------------------------
// Op constructors

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_defined(a, "matmul");
  require_defined(b, "matmul");
  require(a.ndim() == 2 && b.ndim() == 2 && a.dim(1) == b.dim(0),
          "matmul: cannot multiply " + shape_string(a.shape()) + " by " +
              shape_string(b.shape()));
  auto fn = std::make_unique<MatmulFn>();
  fn->m = a.dim(0);
  fn->k = a.dim(1);
  fn->n = b.dim(1);
  fn->inputs = {a, b};
  Shape out{fn->m, fn->n};
  return make_op(std::move(out), std::move(fn));
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_defined(x, "linear");
  require_defined(weight, "linear");
  require(weight.ndim() == 2, "linear: weight must be 2-D, got " +
                                  shape_string(weight.shape()));
  const std::size_t in = weight.dim(1), out_dim = weight.dim(0);
  require(x.ndim() >= 1 && x.shape().back() == in,
          "linear: input " + shape_string(x.shape()) + " does not match weight " +
              shape_string(weight.shape()));
  auto fn = std::make_unique<LinearFn>();
  fn->rows = x.numel() / in;
  fn->in = in;
  fn->out_dim = out_dim;
  fn->has_bias = bias.defined();
  fn->inputs = {x, weight};
  if (bias.defined()) {
    require(bias.numel() == out_dim, "linear: bias " +
                                         shape_string(bias.shape()) +
                                         " does not match weight " +
                                         shape_string(weight.shape()));
    fn->inputs.push_back(bias);
  }
  Shape out = x.shape();
  out.back() = out_dim;
  return make_op(std::move(out), std::move(fn));
}

namespace {

Tensor batched(const Tensor& a, const Tensor& b, bool transpose_b) {
  require_defined(a, "bmm");
  require_defined(b, "bmm");
  require(a.ndim() == 3 && b.ndim() == 3 && a.dim(0) == b.dim(0),
          "bmm: incompatible " + shape_string(a.shape()) + " and " +
              shape_string(b.shape()));
  auto fn = std::make_unique<BmmFn>();
  fn->batch = a.dim(0);
  fn->m = a.dim(1);
  fn->k = a.dim(2);
  fn->transpose_b = transpose_b;
  if (transpose_b) {
    require(b.dim(2) == fn->k, "bmm_nt: inner dims differ in " +
                                   shape_string(a.shape()) + " and " +
                                   shape_string(b.shape()));
    fn->n = b.dim(1);
  } else {
    require(b.dim(1) == fn->k, "bmm: inner dims differ in " +
                                   shape_string(a.shape()) + " and " +
                                   shape_string(b.shape()));
    fn->n = b.dim(2);
  }
  fn->inputs = {a, b};
  Shape out{fn->batch, fn->m, fn->n};
  return make_op(std::move(out), std::move(fn));
}

}  // namespace

Tensor bmm(const Tensor& a, const Tensor& b) { return batched(a, b, false); }
Tensor bmm_nt(const Tensor& a, const Tensor& b) { return batched(a, b, true); }

Tensor softmax_masked(const Tensor& x, std::span<const std::uint8_t> mask) {
  require_defined(x, "softmax_masked");
  require(x.ndim() >= 1, "softmax_masked: scalar input");
  require(mask.size() == x.numel(),
          "softmax_masked: mask has " + std::to_string(mask.size()) +
              " entries for input " + shape_string(x.shape()));
  auto fn = std::make_unique<SoftmaxMaskedFn>();
  fn->mask.assign(mask.begin(), mask.end());
  fn->width = x.shape().back();
  fn->inputs = {x};
  return make_op(x.shape(), std::move(fn));
}

Tensor layer_norm(const Tensor& x, double eps) {
  require_defined(x, "layer_norm");
  require(x.ndim() >= 1 && x.shape().back() >= 1, "layer_norm: empty last dim");
  auto fn = std::make_unique<LayerNormFn>();
  fn->width = x.shape().back();
  fn->eps = eps;
  fn->inputs = {x};
  return make_op(x.shape(), std::move(fn));
}

Activation parse_activation(std::string_view name) {
  if (name == "identity") return Activation::kIdentity;
  if (name == "gelu") return Activation::kGelu;
  if (name == "silu") return Activation::kSilu;
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  throw InvalidArgument("unknown activation '" + std::string(name) + "'");
}

std::string_view activation_name(Activation act) {
  switch (act) {
    case Activation::kIdentity: return "identity";
    case Activation::kGelu: return "gelu";
    case Activation::kSilu: return "silu";
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
  }
  return "identity";
}

Tensor add(const Tensor& a, const Tensor& b) { return binary(BinaryKind::kAdd, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(BinaryKind::kSub, a, b); }
Tensor hadamard(const Tensor& a, const Tensor& b) {
  return binary(BinaryKind::kMul, a, b);
}

Tensor add_scalar(const Tensor& x, double c) {
  require_defined(x, "add_scalar");
  auto fn = std::make_unique<AffineScalarFn>();
  fn->add = c;
  fn->inputs = {x};
  return make_op(x.shape(), std::move(fn));
}

Tensor scale(const Tensor& x, double c) {
  require_defined(x, "scale");
  auto fn = std::make_unique<AffineScalarFn>();
  fn->mul = c;
  fn->inputs = {x};
  return make_op(x.shape(), std::move(fn));
}

Tensor activate(Activation act, const Tensor& x) {
  require_defined(x, "activation");
  if (act == Activation::kIdentity) return x;
  auto fn = std::make_unique<UnaryFn>();
  fn->act = act;
  fn->inputs = {x};
  return make_op(x.shape(), std::move(fn));
}

Tensor gelu(const Tensor& x) { return activate(Activation::kGelu, x); }
Tensor silu(const Tensor& x) { return activate(Activation::kSilu, x); }
Tensor relu(const Tensor& x) { return activate(Activation::kRelu, x); }
Tensor tanh(const Tensor& x) { return activate(Activation::kTanh, x); }

Tensor concat_last(const Tensor& a, const Tensor& b) {
  require_defined(a, "concat_last");
  require_defined(b, "concat_last");
  require(a.ndim() >= 1 && a.ndim() == b.ndim() &&
              std::equal(a.shape().begin(), a.shape().end() - 1,
                         b.shape().begin()),
          "concat_last: leading shapes differ in " + shape_string(a.shape()) +
              " and " + shape_string(b.shape()));
  auto fn = std::make_unique<ConcatLastFn>();
  fn->da = a.shape().back();
  fn->db = b.shape().back();
  Shape out = a.shape();
  out.back() = fn->da + fn->db;
  fn->rows = shape_numel(out) / std::max<std::size_t>(out.back(), 1);
  if (out.back() == 0) fn->rows = 0;
  fn->inputs = {a, b};
  return make_op(std::move(out), std::move(fn));
}

Tensor gather_rows(const Tensor& x, std::vector<std::size_t> rows,
                   Shape out_leading) {
  require_defined(x, "gather_rows");
  const std::size_t width = last_dim(x);
  const std::size_t n_rows = x.numel() / width;
  require(shape_numel(out_leading) == rows.size(),
          "gather_rows: " + std::to_string(rows.size()) +
              " indices for leading shape " + shape_string(out_leading));
  for (std::size_t r : rows)
    if (r >= n_rows)
      throw InvalidArgument("gather_rows: index " + std::to_string(r) +
                            " out of range for " + std::to_string(n_rows) +
                            " rows");
  auto fn = std::make_unique<GatherRowsFn>();
  fn->rows = std::move(rows);
  fn->width = width;
  fn->inputs = {x};
  out_leading.push_back(width);
  return make_op(std::move(out_leading), std::move(fn));
}

Tensor reshape(const Tensor& x, Shape shape) {
  require_defined(x, "reshape");
  require(shape_numel(shape) == x.numel(),
          "reshape: cannot view " + shape_string(x.shape()) + " as " +
              shape_string(shape));
  auto fn = std::make_unique<CopyFn>();
  fn->inputs = {x};
  return make_op(std::move(shape), std::move(fn));
}

Tensor split_heads(const Tensor& x, std::size_t n_heads) {
  require_defined(x, "split_heads");
  require(x.ndim() == 3 && n_heads > 0 && x.dim(2) % n_heads == 0,
          "split_heads: " + shape_string(x.shape()) + " not divisible into " +
              std::to_string(n_heads) + " heads");
  auto fn = std::make_unique<HeadsFn>();
  fn->b = x.dim(0);
  fn->l = x.dim(1);
  fn->h = n_heads;
  fn->d = x.dim(2) / n_heads;
  fn->split = true;
  fn->inputs = {x};
  Shape out{fn->b * fn->h, fn->l, fn->d};
  return make_op(std::move(out), std::move(fn));
}

Tensor merge_heads(const Tensor& x, std::size_t n_heads) {
  require_defined(x, "merge_heads");
  require(x.ndim() == 3 && n_heads > 0 && x.dim(0) % n_heads == 0,
          "merge_heads: " + shape_string(x.shape()) + " not divisible into " +
              std::to_string(n_heads) + " heads");
  auto fn = std::make_unique<HeadsFn>();
  fn->b = x.dim(0) / n_heads;
  fn->l = x.dim(1);
  fn->h = n_heads;
  fn->d = x.dim(2);
  fn->split = false;
  fn->inputs = {x};
  Shape out{fn->b, fn->l, fn->h * fn->d};
  return make_op(std::move(out), std::move(fn));
}

Tensor mask_multiply(const Tensor& x, std::vector<double> mask) {
  require_defined(x, "mask_multiply");
  require(mask.size() == x.numel(), "mask_multiply: mask size mismatch for " +
                                        shape_string(x.shape()));
  auto fn = std::make_unique<MaskMultiplyFn>();
  fn->mask = std::move(mask);
  fn->inputs = {x};
  return make_op(x.shape(), std::move(fn));
}

Tensor sum(const Tensor& x) {
  require_defined(x, "sum");
  auto fn = std::make_unique<SumFn>();
  fn->inputs = {x};
  return make_op({}, std::move(fn));
}

Tensor mean(const Tensor& x) {
  require_defined(x, "mean");
  require(x.numel() > 0, "mean of empty tensor");
  auto fn = std::make_unique<SumFn>();
  fn->factor = 1.0 / static_cast<double>(x.numel());
  fn->inputs = {x};
  return make_op({}, std::move(fn));
}

namespace {

double count_active(std::span<const std::uint8_t> row_mask) {
  double n = 0;
  for (auto m : row_mask) n += m ? 1.0 : 0.0;
  if (n == 0) throw InvalidMaskError("loss: every position is masked");
  return n;
}

}  // namespace

Tensor mse_rows(const Tensor& pred, std::span<const double> target,
                std::span<const std::uint8_t> row_mask) {
  require_defined(pred, "mse_rows");
  const std::size_t width = last_dim(pred);
  require(target.size() == pred.numel() &&
              row_mask.size() * width == pred.numel(),
          "mse_rows: prediction " + shape_string(pred.shape()) +
              " does not match targets");
  auto fn = std::make_unique<MseRowsFn>();
  fn->target.assign(target.begin(), target.end());
  fn->row_mask.assign(row_mask.begin(), row_mask.end());
  fn->width = width;
  fn->active = count_active(row_mask);
  fn->inputs = {pred};
  return make_op({}, std::move(fn));
}

Tensor cross_entropy_rows(const Tensor& logits, std::span<const int> classes,
                          std::span<const std::uint8_t> row_mask) {
  require_defined(logits, "cross_entropy_rows");
  const std::size_t width = last_dim(logits);
  require(classes.size() * width == logits.numel() &&
              row_mask.size() == classes.size(),
          "cross_entropy_rows: logits " + shape_string(logits.shape()) +
              " do not match targets");
  for (std::size_t r = 0; r < classes.size(); ++r)
    if (row_mask[r] &&
        (classes[r] < 0 || static_cast<std::size_t>(classes[r]) >= width))
      throw InvalidArgument("cross_entropy_rows: class " +
                            std::to_string(classes[r]) + " out of range");
  auto fn = std::make_unique<CrossEntropyRowsFn>();
  fn->classes.assign(classes.begin(), classes.end());
  fn->row_mask.assign(row_mask.begin(), row_mask.end());
  fn->width = width;
  fn->active = count_active(row_mask);
  fn->inputs = {logits};
  return make_op({}, std::move(fn));
}

// ---------------------------------------------------------------------------
// Finite differences

namespace {

double slot_error(double fd, double ad, double floor) {
  return std::abs(fd - ad) / std::max(std::abs(ad), floor);
}

}  // namespace

double finite_diff_check(const std::function<Tensor(const Tensor&)>& f,
                         const Tensor& x, double h, double floor, int order) {
  Tensor probe = Tensor::from(x.shape(), std::vector<double>(x.data().begin(),
                                                             x.data().end()),
                              true);
  return finite_diff_check_params([&] { return f(probe); },
                                  std::span<const Tensor>(&probe, 1), h, floor,
                                  order);
}

double finite_diff_check_params(const std::function<Tensor()>& f,
                                std::span<const Tensor> params, double h,
                                double floor, int order) {
  if (order != 2 && order != 4)
    throw InvalidArgument("finite_diff_check: order must be 2 or 4");
  std::vector<Tensor> ps(params.begin(), params.end());
  for (Tensor& p : ps) p.zero_grad();
  Tensor y = f();
  if (y.numel() != 1)
    throw DimensionError("finite_diff_check: function is not scalar-valued");
  backward(y);
  double worst = 0.0;
  for (Tensor& p : ps) {
    std::vector<double> ad(p.numel(), 0.0);
    if (p.has_grad()) std::copy(p.grad().begin(), p.grad().end(), ad.begin());
    auto values = p.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      auto at = [&](double v) {
        values[i] = v;
        return f().item();
      };
      double fd = 0.0;
      if (order == 2) {
        fd = (at(saved + h) - at(saved - h)) / (2.0 * h);
      } else {
        fd = (-at(saved + 2.0 * h) + 8.0 * at(saved + h) - 8.0 * at(saved - h) +
              at(saved - 2.0 * h)) /
             (12.0 * h);
      }
      values[i] = saved;
      worst = std::max(worst, slot_error(fd, ad[i], floor));
    }
  }
  return worst;
}

}  // namespace radt
