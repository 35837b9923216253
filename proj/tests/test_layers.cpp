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

#include <sstream>

#include "doctest.h"
#include "radt/layers.hpp"
#include "test_support.hpp"

using namespace radt;
using radt::testing::bit_equal;

namespace {

// Test-time weights at unit scale so gradients are not vanishingly small.
void randomize(const LinearLayer& layer, Rng& rng, double stddev = 0.5) {
  Tensor w = layer.weight;
  std::normal_distribution<double> d(0.0, stddev);
  for (double& v : w.mutable_data()) v = d(rng);
  if (layer.bias.defined()) {
    Tensor b = layer.bias;
    for (double& v : b.mutable_data()) v = d(rng);
  }
}

}  // namespace

TEST_CASE("zero-init linear layer outputs zeros") {
  Rng rng(1);
  auto layer = make_linear(4, 3, InitMode::kZero, rng);
  for (double v : layer.weight.data()) CHECK(v == 0.0);
  for (double v : layer.bias.data()) CHECK(v == 0.0);
  auto y = linear_forward(layer, radt::testing::random_tensor({5, 4}, rng));
  CHECK(y.shape() == Shape{5, 3});
  for (double v : y.data()) CHECK(v == 0.0);
}

TEST_CASE("identity weight with zero bias is the identity") {
  Rng rng(2);
  auto layer = make_linear(3, 3, InitMode::kZero, rng);
  Tensor w = layer.weight;
  for (std::size_t i = 0; i < 3; ++i) w.mutable_data()[i * 3 + i] = 1.0;
  Tensor x = radt::testing::random_tensor({2, 4, 3}, rng);
  CHECK(bit_equal(linear_forward(layer, x).data(), x.data()));
  CHECK_THROWS_AS(linear_forward(layer, Tensor::zeros({2, 4})), DimensionError);
}

TEST_CASE("linear layer gradients pass finite differences") {
  Rng rng(3);
  auto layer = make_linear(5, 4, InitMode::kScaledNormal, rng);
  randomize(layer, rng);
  Tensor x = radt::testing::random_tensor({3, 5}, rng);
  Tensor w = Tensor::normal({3, 4}, 1.0, rng);
  std::vector<Tensor> params{layer.weight, layer.bias, x};
  CHECK(finite_diff_check_params(
            [&] { return sum(hadamard(linear_forward(layer, x), w)); }, params) <
        1e-4);
}

TEST_CASE("mlp heads") {
  Rng rng(4);
  SUBCASE("final-zero-init head returns exact zeros at construction") {
    auto head = make_mlp({6, 6, 6}, Activation::kSilu, true, rng);
    auto y = mlp_forward(head, radt::testing::random_tensor({4, 6}, rng, 3.0));
    for (double v : y.data()) CHECK(v == 0.0);
  }
  SUBCASE("one-layer head equals linear_forward") {
    auto head = make_mlp({3, 2}, Activation::kSilu, false, rng);
    Tensor x = radt::testing::random_tensor({4, 3}, rng);
    CHECK(bit_equal(mlp_forward(head, x).data(),
                    linear_forward(head.layers[0], x).data()));
  }
  SUBCASE("two-layer silu head gradients") {
    auto head = make_mlp({4, 5, 3}, Activation::kSilu, false, rng);
    for (auto& l : head.layers) randomize(l, rng);
    Tensor x = radt::testing::random_tensor({2, 4}, rng);
    Tensor w = Tensor::normal({2, 3}, 1.0, rng);
    std::vector<Tensor> params{head.layers[0].weight, head.layers[0].bias,
                               head.layers[1].weight, head.layers[1].bias, x};
    CHECK(finite_diff_check_params(
              [&] { return sum(hadamard(mlp_forward(head, x), w)); }, params) <
          1e-4);
  }
}

TEST_CASE("dropout contract") {
  Rng rng(5);
  Tensor x = radt::testing::random_tensor({8, 8}, rng);
  CHECK(dropout(x, 0.0, true, rng).node_id() == x.node_id());
  CHECK(dropout(x, 0.9, false, rng).node_id() == x.node_id());
  CHECK_THROWS_AS(dropout(x, 1.0, true, rng), InvalidArgument);
  CHECK_THROWS_AS(dropout(x, -0.1, true, rng), InvalidArgument);

  // Monte-Carlo: inverted dropout is unbiased.
  Tensor ones = Tensor::full({10000}, 1.0);
  Rng fixed(1234);
  auto y = dropout(ones, 0.5, true, fixed);
  double mean = 0.0;
  std::size_t zeros = 0;
  for (double v : y.data()) {
    mean += v;
    zeros += v == 0.0;
    CHECK((v == 0.0 || v == 2.0));
  }
  mean /= 10000.0;
  CHECK(std::abs(mean - 1.0) < 0.05);
  CHECK(zeros > 4500);
  CHECK(zeros < 5500);
}

TEST_CASE("embedding lookup bounds") {
  Rng rng(6);
  auto emb = make_embedding(5, 3, rng);
  std::vector<int> idx{0, 4, 4};
  auto y = embedding_lookup(emb, idx, {3});
  CHECK(y.shape() == Shape{3, 3});
  CHECK(y.data()[3] == emb.table.data()[12]);
  std::vector<int> bad{5};
  CHECK_THROWS_AS(embedding_lookup(emb, bad, {1}), InvalidArgument);
}

TEST_CASE("checkpoint round trip is bit-exact") {
  Rng rng(7);
  ParameterSet params;
  auto a = make_linear(3, 4, InitMode::kScaledNormal, rng);
  randomize(a, rng, 1e3);
  params.add_linear("a", a);
  params.add("odd", Tensor::from({2}, {-0.0, 1e-310}, true));
  CheckpointHeader header;
  header.config_digest = 0xdeadbeefcafef00dULL;
  header.config_text = "[model]\nd_model = 4\n";
  header.return_scale = 35.5;

  std::stringstream first;
  write_checkpoint(first, header, params);
  const std::string bytes = first.str();
  CHECK(bytes.substr(0, 8) == "RADTCKPT");

  std::stringstream in(bytes);
  Checkpoint ck = read_checkpoint(in);
  CHECK(ck.header.config_digest == header.config_digest);
  CHECK(ck.header.config_text == header.config_text);
  CHECK(ck.header.return_scale == 35.5);
  REQUIRE(ck.records.size() == 3);

  ParameterSet other;
  Rng rng2(99);
  other.add_linear("a", make_linear(3, 4, InitMode::kZero, rng2));
  other.add("odd", Tensor::zeros({2}, true));
  restore_parameters(ck, other);
  std::stringstream second;
  write_checkpoint(second, header, other);
  CHECK(second.str() == bytes);

  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(read_checkpoint(truncated), IntegrityError);
  std::stringstream garbage("NOTACKPT....");
  CHECK_THROWS_AS(read_checkpoint(garbage), IntegrityError);

  ParameterSet wrong;
  wrong.add("a.weight", Tensor::zeros({4, 4}, true));
  wrong.add("a.bias", Tensor::zeros({4}, true));
  wrong.add("odd", Tensor::zeros({2}, true));
  CHECK_THROWS_AS(restore_parameters(ck, wrong), IntegrityError);
}

TEST_CASE("parameter set rejects duplicate names") {
  ParameterSet p;
  p.add("x", Tensor::zeros({1}, true));
  CHECK_THROWS_AS(p.add("x", Tensor::zeros({1}, true)), InvalidArgument);
  CHECK(p.parameter_count() == 1);
}
