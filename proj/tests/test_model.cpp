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

#include <cmath>
#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "model_fixtures.hpp"
#include "test_support.hpp"

using namespace radt;
using namespace radt::testing;

namespace {

std::vector<double> slot(const Tensor& pred, std::size_t b, std::size_t t) {
  const std::size_t k = pred.dim(1), a = pred.dim(2);
  auto d = pred.data();
  return {d.begin() + (b * k + t) * a, d.begin() + (b * k + t + 1) * a};
}

// Perturbs everything at timesteps > t plus the action at t.
Window perturb_future(const RadtConfig& c, Window w, std::size_t b, std::size_t t,
                      Rng& rng) {
  std::normal_distribution<double> n(0.0, 2.0);
  const std::size_t aw = c.action.width();
  for (std::size_t u = t; u < w.k; ++u) {
    const std::size_t row = b * w.k + u;
    for (std::size_t i = 0; i < aw; ++i)
      w.actions[row * aw + i] =
          c.action.discrete ? static_cast<double>((static_cast<int>(w.actions[row * aw + i]) + 1) %
                                                  static_cast<int>(c.action.size))
                            : std::tanh(n(rng));
    if (u == t) continue;
    w.rtg[row] += n(rng);
    for (std::size_t i = 0; i < c.state_dim; ++i) w.states[row * c.state_dim + i] += n(rng);
  }
  return w;
}

}  // namespace

TEST_CASE("config round-trips through ini text") {
  RadtConfig c = toy_config(Variant::kRadt);
  c.use_stepra = false;
  c.dropout = 0.125;
  auto back = RadtConfig::from_ini(IniDocument::parse(c.canonical_text()));
  CHECK(back.canonical_text() == c.canonical_text());
  CHECK(back.digest() == c.digest());
  CHECK_FALSE(back.use_stepra);

  RadtConfig bad = c;
  bad.n_heads = 3;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  CHECK_THROWS_AS(RadtConfig::from_ini(IniDocument::parse("[model]\nwidth = 3\n")),
                  ParseError);
  CHECK_THROWS_AS(RadtConfig::from_ini(IniDocument::parse("[model]\nd_model = x\n")),
                  ParseError);
}

TEST_CASE("zero-init radt block equals a matched post-LN block") {
  Rng rng(21);
  for (bool seqra : {true, false}) {
    RadtConfig c = toy_config(Variant::kRadt, 4, 16, 2);
    c.use_seqra = seqra;
    Model m(c, 7);
    Window w = random_window(c, 3, 4, rng, {4, 2, 1});
    TokenizedWindow tw = m.embed(w);
    Tensor got = m.radt_block(0, tw.sa, tw.returns, tw.map, tw.pad, {});
    Tensor want = reference_post_ln_block(m.radt_blocks()[0], tw.sa, tw.returns,
                                          tw.map, tw.pad, seqra);
    CHECK(max_abs_diff(got.data(), want.data()) < 1e-12);
    CHECK(bit_equal(got.data(), want.data()));
  }
}

TEST_CASE("with both aligners off the return stream is severed") {
  Rng rng(22);
  RadtConfig c = toy_config(Variant::kRadt);
  c.use_seqra = false;
  c.use_stepra = false;
  Model m(c, 3);
  randomize_parameters(m, rng);
  Window w = random_window(c, 2, 3, rng);
  Tensor y = m.forward(w);
  Window w2 = w;
  for (double& r : w2.rtg) r = -r + 5.0;
  CHECK(bit_equal(y.data(), m.forward(w2).data()));

  // And it equals a plain post-LN causal transformer over the sa stream.
  TokenizedWindow tw = m.embed(w);
  Tensor x = tw.sa;
  for (std::size_t i = 0; i < c.n_layers; ++i)
    x = reference_post_ln_block(m.radt_blocks()[i], x, tw.returns, tw.map, tw.pad,
                                false);
  Tensor blocks = m.radt_block(1, m.radt_block(0, tw.sa, tw.returns, tw.map, tw.pad, {}),
                               tw.returns, tw.map, tw.pad, {});
  CHECK(bit_equal(x.data(), blocks.data()));
}

TEST_CASE("predictions ignore future tokens exactly") {
  Rng rng(23);
  for (Variant v : {Variant::kRadt, Variant::kDt}) {
    for (bool discrete : {false, true}) {
      RadtConfig c = toy_config(v, 5, 8, 2, discrete);
      Model m(c, 5);
      randomize_parameters(m, rng);
      for (int trial = 0; trial < 10; ++trial) {
        Window w = random_window(c, 2, 5, rng, {5, 3});
        Tensor y = m.forward(w);
        const std::size_t t = static_cast<std::size_t>(trial) % 5;
        Window w2 = perturb_future(c, w, 0, t, rng);
        Tensor y2 = m.forward(w2);
        for (std::size_t u = 0; u <= t; ++u) CHECK(bit_equal(slot(y, 0, u), slot(y2, 0, u)));
        if (t + 1 < 5) CHECK_FALSE(bit_equal(slot(y, 0, 4), slot(y2, 0, 4)));
        for (std::size_t u = 0; u < 5; ++u) CHECK(bit_equal(slot(y, 1, u), slot(y2, 1, u)));
      }
    }
  }
}

TEST_CASE("left padding does not change real predictions") {
  Rng rng(24);
  for (Variant v : {Variant::kRadt, Variant::kDt}) {
    RadtConfig c = toy_config(v, 5, 8, 2);
    Model m(c, 6);
    randomize_parameters(m, rng);
    Window shortw = random_window(c, 1, 2, rng);
    Window padded = Window::empty(1, 5, c.state_dim, c.action.width());
    std::normal_distribution<double> n(0.0, 4.0);
    for (std::size_t t = 0; t < 3; ++t) {  // junk in padded slots
      padded.rtg[t] = n(rng);
      padded.states[t * c.state_dim] = n(rng);
      padded.timesteps[t] = 30;
    }
    for (std::size_t t = 0; t < 2; ++t) {
      const std::size_t dst = t + 3;
      padded.pad.real[dst] = 1;
      padded.rtg[dst] = shortw.rtg[t];
      padded.timesteps[dst] = shortw.timesteps[t];
      for (std::size_t i = 0; i < c.state_dim; ++i)
        padded.states[dst * c.state_dim + i] = shortw.states[t * c.state_dim + i];
      for (std::size_t i = 0; i < 2; ++i)
        padded.actions[dst * 2 + i] = shortw.actions[t * 2 + i];
    }
    Tensor a = m.forward(shortw), b = m.forward(padded);
    for (std::size_t t = 0; t < 2; ++t) CHECK(bit_equal(slot(a, 0, t), slot(b, 0, t + 3)));
  }
}

TEST_CASE("embedding and forward contracts") {
  Rng rng(25);
  RadtConfig c = toy_config(Variant::kRadt, 1);
  Model m(c, 1);
  Window w = random_window(c, 1, 1, rng);
  TokenizedWindow tw = m.embed(w);
  CHECK(tw.returns.shape() == Shape{1, 1, 16});
  CHECK(tw.sa.shape() == Shape{1, 1, 16});

  RadtConfig cdt = toy_config(Variant::kDt, 3);
  Model dt(cdt, 1);
  CHECK(dt.embed(random_window(cdt, 2, 3, rng)).sa.shape() == Shape{2, 8, 16});

  RadtConfig big = toy_config(Variant::kRadt, 4);
  Model mb(big, 2);
  randomize_parameters(mb, rng, 2.0);
  Tensor y = mb.forward(random_window(big, 4, 4, rng));
  for (double v : y.data()) CHECK(std::abs(v) <= 1.0);

  Window late = random_window(big, 1, 4, rng);
  late.timesteps[3] = 40;
  CHECK_THROWS_AS(mb.forward(late), InvalidArgument);
  Window unpadded_end = random_window(big, 1, 4, rng, {4});
  unpadded_end.pad.real[3] = 0;
  CHECK_THROWS_AS(mb.forward(unpadded_end), InvalidMaskError);
  CHECK_THROWS_AS(mb.forward(random_window(toy_config(Variant::kRadt, 5), 1, 5, rng)),
                  DimensionError);
  late.timesteps[3] = 3;
  CHECK(bit_equal(mb.forward(late).data(), mb.forward(late).data()));
}

TEST_CASE("loss contracts") {
  Rng rng(26);
  SUBCASE("continuous: perfect prediction gives zero, padding ignored") {
    RadtConfig c = toy_config(Variant::kRadt, 3);
    Model m(c, 1);
    Window w = random_window(c, 2, 3, rng, {3, 1});
    Tensor pred = Tensor::from({2, 3, 2}, w.actions, true);
    CHECK(m.loss(pred, w).item() == 0.0);
    Tensor y = m.forward(w);
    const double base = m.loss(y, w).item();
    Window w2 = w;
    w2.actions[2 * 3 + 0] = 0.7;  // padded slot of row 1
    CHECK(m.loss(y, w2).item() == base);
    CHECK(m.loss(y, w, true).item() != base);
  }
  SUBCASE("discrete: uniform logits give ln n") {
    RadtConfig c = toy_config(Variant::kDt, 3, 16, 2, true);
    Model m(c, 1);
    Window w = random_window(c, 2, 3, rng);
    CHECK(std::abs(m.loss(Tensor::zeros({2, 3, 4}, true), w).item() - std::log(4.0)) < 1e-12);
  }
}

TEST_CASE("model summary and parameter counts") {
  Model radt_model(toy_config(Variant::kRadt), 1);
  Model dt_model(toy_config(Variant::kDt), 1);
  CHECK(radt_model.parameters().parameter_count() != dt_model.parameters().parameter_count());
  auto j = nlohmann::json::parse(radt_model.summary_json());
  CHECK(j["parameter_count"] == radt_model.parameters().parameter_count());
  CHECK(j["modules"].contains("block1"));
  CHECK(j["config"]["variant"] == "radt");

  RadtConfig c = toy_config(Variant::kRadt);
  c.use_adaptive_scaling = false;
  Model no_scale(c, 1);
  CHECK(no_scale.parameters().find("block0.seqra.scale_proj.weight") == nullptr);
  CHECK(radt_model.parameters().find("block0.seqra.scale_proj.weight") != nullptr);
  for (std::size_t i = 0; i < 2; ++i)
    for (double v : radt_model.radt_blocks()[i].seqra.scale_proj.weight.data()) CHECK(v == 0.0);

  Model again(toy_config(Variant::kRadt), 1);
  for (std::size_t i = 0; i < again.parameters().size(); ++i)
    CHECK(bit_equal(again.parameters().entries()[i].second.data(),
                    radt_model.parameters().entries()[i].second.data()));
}

TEST_CASE("model checkpoint round trip") {
  Rng rng(27);
  RadtConfig c = toy_config(Variant::kRadt);
  Model m(c, 9);
  randomize_parameters(m, rng);
  m.set_return_scale(12.5);
  const auto path = std::filesystem::temp_directory_path() / "radt_test_model.bin";
  save_model(path.string(), m);
  Model back = load_model(path.string());
  CHECK(back.return_scale() == 12.5);
  Window w = random_window(c, 2, 3, rng);
  CHECK(bit_equal(back.forward(w).data(), m.forward(w).data()));
  std::filesystem::remove(path);
}

TEST_CASE("full model gradients pass finite differences") {
  Rng rng(28);
  for (Variant v : {Variant::kRadt, Variant::kDt}) {
    RadtConfig c = toy_config(v, 3, 16, 2);
    Model m(c, 11);
    randomize_parameters(m, rng, 0.2);
    m.set_return_scale(10.0);
    Window w = random_window(c, 2, 3, rng, {3, 2});
    std::vector<Tensor> params;
    for (const auto& [name, t] : m.parameters().entries()) params.push_back(t);
    const double err =
        finite_diff_check_params([&] { return m.loss(m.forward(w), w); }, params,
                                 1e-3, 1e-8, 4);
    INFO("variant " << variant_name(v) << " rel err " << err);
    CHECK(err < 1e-4);
  }
}
