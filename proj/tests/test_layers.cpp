/* Copyright 2026 The ladapt Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <cmath>
#include <vector>

#include "doctest.h"
#include "ladapt/layers.hpp"
#include "ladapt/optimizer.hpp"
#include "ladapt/rng.hpp"

using namespace ladapt;

namespace {

Tensor random_tensor(Shape shape, Pcg32& rng, double lo = -1.0,
                     double hi = 1.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

void zero_params(Model& m) {
  for (Param& p : m.params()) p.value = Tensor(p.value.shape());
}

}  // namespace

TEST_SUITE("layers") {

TEST_CASE("squeeze averages each channel over all spatial positions") {
  Graph g;
  NodeId x = g.constant(Tensor({2, 2, 1}, {1, 2, 3, 4}));
  NodeId z = squeeze(g, x);
  CHECK(g.value(z).shape() == Shape{1});
  CHECK(g.value(z)[0] == doctest::Approx(2.5));
}

TEST_CASE("squeeze of a 1x1 map returns the channel vector unchanged") {
  Graph g;
  NodeId x = g.constant(Tensor({1, 1, 4}, {3, -1, 2, 7}));
  NodeId z = squeeze(g, x);
  CHECK(g.value(z).values() == std::vector<double>{3, -1, 2, 7});
}

TEST_CASE("squeeze matches the explicit double-sum oracle") {
  Pcg32 rng(42);
  Tensor x = random_tensor({4, 4, 8}, rng);
  // Oracle: z_k = (1 / (H*W)) * sum_ij u_k(i, j).
  std::vector<double> expect(8, 0.0);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      for (int k = 0; k < 8; ++k) {
        expect[k] += x[(i * 4 + j) * 8 + k];
      }
    }
  }
  for (double& v : expect) v /= 16.0;
  Graph g;
  NodeId z = squeeze(g, g.constant(x));
  for (int k = 0; k < 8; ++k) {
    CHECK(g.value(z)[k] == doctest::Approx(expect[k]).epsilon(1e-12));
  }
}

TEST_CASE("squeeze is invariant to spatial permutations within channels") {
  Pcg32 rng(5);
  Tensor x = random_tensor({3, 3, 2}, rng);
  Tensor shuffled = x;
  // Permute the 9 spatial positions identically for every channel.
  std::vector<std::size_t> perm(9);
  for (std::size_t i = 0; i < 9; ++i) perm[i] = i;
  rng.shuffle(perm);
  for (std::size_t p = 0; p < 9; ++p) {
    for (std::size_t c = 0; c < 2; ++c) {
      shuffled[p * 2 + c] = x[perm[p] * 2 + c];
    }
  }
  Graph g;
  Tensor a = g.value(squeeze(g, g.constant(x)));
  Tensor b = g.value(squeeze(g, g.constant(shuffled)));
  for (std::size_t c = 0; c < 2; ++c) {
    CHECK(a[c] == doctest::Approx(b[c]).epsilon(1e-12));
  }
}

TEST_CASE("squeeze is linear") {
  Pcg32 rng(6);
  Tensor x = random_tensor({2, 3, 4}, rng);
  Tensor y = random_tensor({2, 3, 4}, rng);
  double a = 1.7, b = -0.3;
  Tensor combo({2, 3, 4});
  for (std::size_t i = 0; i < combo.size(); ++i) combo[i] = a * x[i] + b * y[i];
  Graph g;
  Tensor zc = g.value(squeeze(g, g.constant(combo)));
  Tensor zx = g.value(squeeze(g, g.constant(x)));
  Tensor zy = g.value(squeeze(g, g.constant(y)));
  for (std::size_t c = 0; c < 4; ++c) {
    CHECK(zc[c] == doctest::Approx(a * zx[c] + b * zy[c]).epsilon(1e-12));
  }
}

TEST_CASE("squeeze rejects bad ranks") {
  Graph g;
  NodeId v = g.constant(Tensor({4}, {1, 2, 3, 4}));
  CHECK_THROWS_AS(squeeze(g, v), ShapeError);
}

TEST_CASE("zero-weight model produces zero logits and zero taps") {
  Model m({4}, {{LayerKind::kDense, 8, true}, {LayerKind::kRelu, 0, true}},
          {}, 2, /*seed=*/1);
  zero_params(m);
  Graph g;
  NodeId x = g.constant(Tensor({3, 4}, std::vector<double>(12, 1.0)));
  Model::Forward f = m.forward(g, x, /*training=*/false);
  CHECK(f.taps.size() == 2);
  for (double v : g.value(f.logits).values()) CHECK(v == 0.0);
  for (NodeId tap : f.taps) {
    for (double v : g.value(tap).values()) CHECK(v == 0.0);
  }
}

TEST_CASE("model with no tapped layers yields an empty tap list") {
  Model m({4}, {{LayerKind::kDense, 8, false}}, {}, 2, 1);
  Graph g;
  NodeId x = g.constant(Tensor({1, 4}, {1, 2, 3, 4}));
  CHECK(m.forward(g, x, false).taps.empty());
}

TEST_CASE("dense forward matches a hand-chained matmul+relu oracle") {
  Model m({4}, {{LayerKind::kDense, 5, false}, {LayerKind::kRelu, 0, false}},
          {}, 3, /*seed=*/3);
  Pcg32 rng(99);
  Tensor x = random_tensor({1, 4}, rng);
  // Oracle: logits = relu(x W0) Wout computed without the graph.
  const Tensor& w0 = m.params()[0].value;   // [4, 5]
  const Tensor& wo = m.params()[1].value;   // [5, 3]
  std::vector<double> h(5, 0.0);
  for (int j = 0; j < 5; ++j) {
    for (int i = 0; i < 4; ++i) h[j] += x[i] * w0[i * 5 + j];
    h[j] = h[j] > 0 ? h[j] : 0;
  }
  std::vector<double> expect(3, 0.0);
  for (int k = 0; k < 3; ++k) {
    for (int j = 0; j < 5; ++j) expect[k] += h[j] * wo[j * 3 + k];
  }
  Graph g;
  Model::Forward f = m.forward(g, g.constant(x), false);
  for (int k = 0; k < 3; ++k) {
    CHECK(g.value(f.logits)[k] == doctest::Approx(expect[k]).epsilon(1e-12));
  }
}

TEST_CASE("conv stack propagates shapes and taps channel counts") {
  Model m({8, 8, 3},
          {{LayerKind::kConv3x3, 6, false},
           {LayerKind::kBatchNorm, 0, false},
           {LayerKind::kRelu, 0, true},
           {LayerKind::kConv1x1, 10, true},
           {LayerKind::kGlobalAvgPool, 0, false}},
          {8}, 2, 4);
  CHECK(m.taps().size() == 2);
  CHECK(m.taps()[0].channels == 6);
  CHECK(m.taps()[1].channels == 10);
  Graph g;
  Pcg32 rng(1);
  Tensor x = random_tensor({2, 8, 8, 3}, rng);
  Model::Forward f = m.forward(g, g.constant(x), /*training=*/true);
  CHECK(g.value(f.logits).shape() == Shape{2, 2});
  CHECK(g.value(f.taps[0]).shape() == Shape{2, 6});
  CHECK(g.value(f.taps[1]).shape() == Shape{2, 10});
}

TEST_CASE("shape propagation failures name the layer") {
  CHECK_THROWS_WITH_AS(
      Model({4}, {{LayerKind::kConv3x3, 2, false}}, {}, 2, 1),
      doctest::Contains("layer f0"), ShapeError);
}

TEST_CASE("parameter count equals the closed-form sum") {
  struct Case {
    Shape input;
    std::vector<LayerSpec> features;
    std::vector<std::size_t> hidden;
    std::size_t classes;
  };
  std::vector<Case> cases = {
      {{4}, {{LayerKind::kDense, 8, true}}, {}, 2},
      {{6}, {{LayerKind::kDense, 16, true}, {LayerKind::kRelu, 0, false},
             {LayerKind::kDense, 12, true}}, {10}, 3},
      {{8, 8, 3},
       {{LayerKind::kConv3x3, 4, false}, {LayerKind::kBatchNorm, 0, false},
        {LayerKind::kRelu, 0, true}, {LayerKind::kConv1x1, 6, true},
        {LayerKind::kGlobalAvgPool, 0, false}},
       {5}, 4},
  };
  for (const Case& c : cases) {
    Model m(c.input, c.features, c.hidden, c.classes, 7);
    CHECK(m.parameter_count() == Model::parameter_count_formula(
                                     c.input, c.features, c.hidden, c.classes));
  }
}

TEST_CASE("model init is deterministic per seed") {
  Model a({4}, {{LayerKind::kDense, 8, true}}, {6}, 2, 123);
  Model b({4}, {{LayerKind::kDense, 8, true}}, {6}, 2, 123);
  Model c({4}, {{LayerKind::kDense, 8, true}}, {6}, 2, 124);
  REQUIRE(a.params().size() == b.params().size());
  bool all_equal = true, differs_from_c = false;
  for (std::size_t i = 0; i < a.params().size(); ++i) {
    all_equal &= a.params()[i].value.values() == b.params()[i].value.values();
    differs_from_c |=
        a.params()[i].value.values() != c.params()[i].value.values();
  }
  CHECK(all_equal);
  CHECK(differs_from_c);
}

TEST_CASE("softmax cross entropy of uniform logits is ln N") {
  Graph g;
  NodeId l = g.constant(Tensor({4}, {0.7, 0.7, 0.7, 0.7}));
  NodeId loss = g.softmax_xent(l, {2});
  CHECK(g.value(loss)[0] == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("softmax cross entropy saturates to zero on a confident hit") {
  Graph g;
  NodeId l = g.constant(Tensor({3}, {100, 0, 0}));
  CHECK(g.value(g.softmax_xent(l, {0}))[0] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("softmax cross entropy matches the direct formula") {
  Pcg32 rng(17);
  Tensor logits = random_tensor({10}, rng, -3, 3);
  int label = 6;
  // Naive oracle without max subtraction.
  double z = 0;
  for (std::size_t i = 0; i < 10; ++i) z += std::exp(logits[i]);
  double expect = -std::log(std::exp(logits[label]) / z);
  Graph g;
  NodeId loss = g.softmax_xent(g.constant(logits), {label});
  CHECK(g.value(loss)[0] == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("softmax cross entropy is nonnegative and ln N only when constant") {
  Pcg32 rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor logits = random_tensor({5}, rng, -2, 2);
    Graph g;
    double v = g.value(g.softmax_xent(g.constant(logits),
                                      {static_cast<int>(rng.below(5))}))[0];
    CHECK(v >= 0.0);
  }
}

TEST_CASE("softmax cross entropy rejects out-of-range labels") {
  Graph g;
  NodeId l = g.constant(Tensor({3}, {1, 2, 3}));
  CHECK_THROWS_AS(g.softmax_xent(l, {3}), ShapeError);
  CHECK_THROWS_AS(g.softmax_xent(l, {-1}), ShapeError);
}

TEST_CASE("sgd leaves parameters alone when grad and decay are zero") {
  SgdOptimizer opt({0.1, 0.9, 0.0});
  Param p{"w", Tensor({2}, {1.5, -0.5})};
  opt.step_one(p, Tensor({2}));
  CHECK(p.value.values() == std::vector<double>{1.5, -0.5});
}

TEST_CASE("plain sgd step") {
  SgdOptimizer opt({0.1, 0.0, 0.0});
  Param p{"w", Tensor({1}, {1.0})};
  opt.step_one(p, Tensor({1}, {1.0}));
  CHECK(p.value[0] == doctest::Approx(0.9).epsilon(1e-15));
}

TEST_CASE("momentum and weight decay follow the scalar recurrence") {
  // Oracle: hand-rolled recurrence for two consecutive steps.
  double lr = 0.001, mu = 0.9, wd = 1e-4, grad = 1.0;
  double pv = 1.0, vv = 0.0;
  for (int step = 0; step < 2; ++step) {
    vv = mu * vv + (grad + wd * pv);
    pv = pv - lr * vv;
  }
  SgdOptimizer opt({lr, mu, wd});
  Param p{"w", Tensor({1}, {1.0})};
  opt.step_one(p, Tensor({1}, {grad}));
  opt.step_one(p, Tensor({1}, {grad}));
  CHECK(p.value[0] == doctest::Approx(pv).epsilon(1e-15));
}

TEST_CASE("sgd with lr 0 is bit-identical") {
  SgdOptimizer opt({0.0, 0.9, 1e-4});
  Param p{"w", Tensor({3}, {0.25, -1.75, 3.5})};
  Tensor before = p.value;
  opt.step_one(p, Tensor({3}, {1, 2, 3}));
  CHECK(p.value.values() == before.values());
}

TEST_CASE("sgd reports missing gradients") {
  Graph g;
  std::vector<Param> params{{"w", Tensor({1}, {1.0})}};
  std::vector<NodeId> bound{g.leaf(params[0].value, true, "w")};
  GradientMap empty;
  SgdOptimizer opt;
  CHECK_THROWS_WITH_AS(opt.step(params, bound, empty, g),
                       doctest::Contains("missing gradient"), Error);
}

}  // TEST_SUITE
