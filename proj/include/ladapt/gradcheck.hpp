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

#ifndef LADAPT_GRADCHECK_HPP_
#define LADAPT_GRADCHECK_HPP_

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "ladapt/autodiff.hpp"
#include "ladapt/graph.hpp"
#include "ladapt/rng.hpp"

namespace ladapt {

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
};

/// Finite-difference audit of the whole op set.
struct GradCheckReport {
  std::vector<GradCheckEntry> entries;

  double worst() const {
    double w = 0.0;
    for (const auto& e : entries) w = std::max(w, e.max_rel_err);
    return w;
  }

  GradCheckEntry& at(const std::string& name) {
    for (auto& e : entries) {
      if (e.name == name) return e;
    }
    entries.push_back({name, 0.0});
    return entries.back();
  }
};

namespace detail {

inline Tensor gradcheck_random(Shape shape, Pcg32& rng, double lo = -1.0,
                               double hi = 1.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

inline Tensor gradcheck_off_zero(Shape shape, Pcg32& rng) {
  Tensor t = gradcheck_random(std::move(shape), rng);
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (std::abs(t[i]) < 0.05) t[i] += t[i] >= 0 ? 0.1 : -0.1;
  }
  return t;
}

inline Tensor gradcheck_away_from(Shape shape, Pcg32& rng, double min_abs) {
  Tensor t = gradcheck_random(std::move(shape), rng);
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (std::abs(t[i]) < min_abs) t[i] = t[i] >= 0 ? min_abs : -min_abs;
  }
  return t;
}

}  // namespace detail

/// Checks every supported op against central finite differences for one
/// seed, folding per-op maxima into `report`. `eps` is the probe step.
inline void run_gradient_suite_seed(std::uint64_t seed, double eps,
                                    GradCheckReport& report) {
  using detail::gradcheck_away_from;
  using detail::gradcheck_off_zero;
  using detail::gradcheck_random;
  Pcg32 rng(seed, rng_stream::kData);

  auto note = [&](const std::string& name, double err) {
    auto& e = report.at(name);
    e.max_rel_err = std::max(e.max_rel_err, err);
  };

  // matmul
  {
    Tensor A = gradcheck_random({3, 4}, rng);
    Tensor B = gradcheck_random({4, 2}, rng);
    note("matmul", check_gradient(
                       [&](Graph& g, NodeId a) {
                         return g.sum(g.square(g.matmul(a, g.constant(B))));
                       },
                       A, eps));
    note("matmul", check_gradient(
                       [&](Graph& g, NodeId b) {
                         return g.sum(g.square(g.matmul(g.constant(A), b)));
                       },
                       B, eps));
  }
  // conv1x1 on a rank-3 map
  {
    Tensor X = gradcheck_random({3, 3, 4}, rng);
    Tensor K = gradcheck_random({4, 3}, rng);
    note("conv1x1", check_gradient(
                        [&](Graph& g, NodeId x) {
                          return g.sum(g.square(g.conv1x1(x, g.constant(K))));
                        },
                        X, eps));
    note("conv1x1", check_gradient(
                        [&](Graph& g, NodeId k) {
                          return g.sum(g.square(g.conv1x1(g.constant(X), k)));
                        },
                        K, eps));
  }
  // conv3x3 valid
  {
    Tensor X = gradcheck_random({1, 4, 4, 2}, rng);
    Tensor K = gradcheck_random({3, 3, 2, 2}, rng);
    note("conv3x3-valid",
         check_gradient(
             [&](Graph& g, NodeId x) {
               return g.sum(g.square(g.conv3x3(x, g.constant(K))));
             },
             X, eps));
    note("conv3x3-valid",
         check_gradient(
             [&](Graph& g, NodeId k) {
               return g.sum(g.square(g.conv3x3(g.constant(X), k)));
             },
             K, eps));
  }
  // add / subtract / mul-by-scalar / square / relu
  {
    Tensor A = gradcheck_random({6}, rng);
    Tensor B = gradcheck_random({6}, rng);
    note("add", check_gradient(
                    [&](Graph& g, NodeId a) {
                      return g.sum(g.square(g.add(a, g.constant(B))));
                    },
                    A, eps));
    note("subtract", check_gradient(
                         [&](Graph& g, NodeId a) {
                           return g.sum(g.square(g.subtract(a, g.constant(B))));
                         },
                         A, eps));
    note("mul-by-scalar", check_gradient(
                              [&](Graph& g, NodeId a) {
                                return g.sum(g.square(g.mul_scalar(a, 1.7)));
                              },
                              A, eps));
    note("square", check_gradient(
                       [&](Graph& g, NodeId a) { return g.sum(g.square(a)); },
                       A, eps));
    Tensor R = gradcheck_off_zero({8}, rng);
    note("relu", check_gradient(
                     [&](Graph& g, NodeId a) {
                       return g.sum(g.square(g.relu(a)));
                     },
                     R, eps));
  }
  // batchnorm (training statistics)
  {
    Tensor X = gradcheck_random({6, 3}, rng);
    Tensor G = gradcheck_away_from({3}, rng, 0.3);
    Tensor B = gradcheck_random({3}, rng);
    auto bn_loss = [&](Graph& g, NodeId x, NodeId gamma, NodeId beta) {
      return g.sum(g.square(g.batchnorm(x, gamma, beta)));
    };
    note("batchnorm",
         check_gradient(
             [&](Graph& g, NodeId x) {
               return bn_loss(g, x, g.constant(G), g.constant(B));
             },
             X, eps));
    note("batchnorm",
         check_gradient(
             [&](Graph& g, NodeId gm) {
               return bn_loss(g, g.constant(X), gm, g.constant(B));
             },
             G, eps));
    note("batchnorm",
         check_gradient(
             [&](Graph& g, NodeId bt) {
               return bn_loss(g, g.constant(X), g.constant(G), bt);
             },
             B, eps));
  }
  // batchnorm with fixed running statistics
  {
    Tensor X = gradcheck_random({4, 3}, rng);
    Tensor G = gradcheck_away_from({3}, rng, 0.3);
    Tensor B = gradcheck_random({3}, rng);
    Tensor M = gradcheck_random({3}, rng);
    Tensor V = gradcheck_random({3}, rng, 0.5, 2.0);
    auto bn_eval_loss = [&](Graph& g, NodeId x, NodeId gamma, NodeId beta) {
      return g.sum(g.square(
          g.batchnorm_eval(x, gamma, beta, g.constant(M), g.constant(V))));
    };
    note("batchnorm-eval",
         check_gradient(
             [&](Graph& g, NodeId x) {
               return bn_eval_loss(g, x, g.constant(G), g.constant(B));
             },
             X, eps));
    note("batchnorm-eval",
         check_gradient(
             [&](Graph& g, NodeId gm) {
               return bn_eval_loss(g, g.constant(X), gm, g.constant(B));
             },
             G, eps));
    note("batchnorm-eval",
         check_gradient(
             [&](Graph& g, NodeId bt) {
               return bn_eval_loss(g, g.constant(X), g.constant(G), bt);
             },
             B, eps));
  }
  // helper kinds the backward pass emits
  {
    Tensor A = gradcheck_random({2, 4}, rng);
    Tensor B = gradcheck_random({2, 4}, rng);
    Tensor D = gradcheck_away_from({2, 4}, rng, 0.5);
    Tensor S = gradcheck_random({2}, rng);
    note("mul", check_gradient(
                    [&](Graph& g, NodeId a) {
                      return g.sum(g.square(g.mul(a, g.constant(B))));
                    },
                    A, eps));
    note("div", check_gradient(
                    [&](Graph& g, NodeId a) {
                      return g.sum(g.square(g.div(a, g.constant(D))));
                    },
                    A, eps));
    note("div", check_gradient(
                    [&](Graph& g, NodeId d) {
                      return g.sum(g.square(g.div(g.constant(A), d)));
                    },
                    D, eps));
    note("transpose", check_gradient(
                          [&](Graph& g, NodeId a) {
                            return g.sum(g.square(g.transpose(a)));
                          },
                          A, eps));
    note("reshape", check_gradient(
                        [&](Graph& g, NodeId a) {
                          return g.sum(g.square(g.reshape(a, {4, 2})));
                        },
                        A, eps));
    note("broadcast", check_gradient(
                          [&](Graph& g, NodeId s) {
                            return g.sum(g.square(g.broadcast(s, {3, 2})));
                          },
                          Tensor::scalar(0.7), eps));
    note("row-l2-norm", check_gradient(
                            [&](Graph& g, NodeId a) {
                              return g.sum(g.row_l2_norm(a));
                            },
                            D, eps));
    note("row-scale", check_gradient(
                          [&](Graph& g, NodeId a) {
                            return g.sum(g.square(g.row_scale(a, g.constant(S))));
                          },
                          A, eps));
    note("row-scale", check_gradient(
                          [&](Graph& g, NodeId s) {
                            return g.sum(g.square(g.row_scale(g.constant(A), s)));
                          },
                          S, eps));
    note("row-sum", check_gradient(
                        [&](Graph& g, NodeId a) {
                          return g.sum(g.square(g.row_sum(a)));
                        },
                        A, eps));
    note("row-broadcast", check_gradient(
                              [&](Graph& g, NodeId s) {
                                return g.sum(g.square(g.row_broadcast(s, 3)));
                              },
                              S, eps));
  }
  // global average pool
  {
    Tensor X = gradcheck_random({2, 3, 3, 4}, rng);
    note("global-avg-pool",
         check_gradient(
             [&](Graph& g, NodeId x) {
               return g.sum(g.square(g.global_avg_pool(x)));
             },
             X, eps));
  }
  // concat
  {
    Tensor A = gradcheck_random({2, 3}, rng);
    Tensor B = gradcheck_random({3, 3}, rng);
    note("concat", check_gradient(
                       [&](Graph& g, NodeId a) {
                         return g.sum(g.square(g.concat({a, g.constant(B)})));
                       },
                       A, eps));
  }
  // reductions
  {
    Tensor X = gradcheck_random({7}, rng);
    note("sum", check_gradient(
                    [&](Graph& g, NodeId x) { return g.square(g.sum(x)); },
                    X, eps));
    note("mean", check_gradient(
                     [&](Graph& g, NodeId x) { return g.square(g.mean(x)); },
                     X, eps));
    Tensor N = gradcheck_away_from({5}, rng, 0.2);
    note("l2-norm",
         check_gradient([&](Graph& g, NodeId x) { return g.l2_norm(x); }, N,
                        eps));
  }
  // softmax cross entropy
  {
    Tensor L = gradcheck_random({4, 5}, rng, -2.0, 2.0);
    std::vector<int> labels;
    for (int b = 0; b < 4; ++b) {
      labels.push_back(static_cast<int>(rng.below(5)));
    }
    note("softmax-cross-entropy",
         check_gradient(
             [&](Graph& g, NodeId l) { return g.softmax_xent(l, labels); }, L,
             eps));
  }
  // Gradient reversal is not the derivative of its forward (that is the
  // point), so plain finite differences cannot check a single reversal.
  // A cancelling pair has true gradient equal to the analytic one, which
  // pins the backward multiplier to exactly -scale.
  {
    Tensor X = gradcheck_random({5}, rng);
    note("grl", check_gradient(
                    [&](Graph& g, NodeId x) {
                      return g.sum(g.square(g.grl(g.grl(x, 1.3), 1.0 / 1.3)));
                    },
                    X, eps));
  }
}

/// Runs the per-op audit over `seeds` seeds.
inline GradCheckReport run_gradient_suite(std::size_t seeds,
                                          double eps = 1e-5) {
  GradCheckReport report;
  for (std::uint64_t s = 1; s <= seeds; ++s) {
    run_gradient_suite_seed(s, eps, report);
  }
  return report;
}

/// Double-backprop audit: derivative of an input-gradient norm with respect
/// to the producing weights, against finite differences. Returns the max
/// relative error over both weight matrices.
inline double run_double_backprop_check(std::uint64_t seed, std::size_t width,
                                        std::size_t hidden,
                                        double eps = 1e-4) {
  Pcg32 rng(seed, rng_stream::kData);
  Tensor z = detail::gradcheck_off_zero({1, width}, rng);
  Tensor w1 = detail::gradcheck_random({width, hidden}, rng);
  Tensor w2 = detail::gradcheck_random({hidden, 1}, rng);

  auto norm_of_input_grad = [&](Graph& g, NodeId w1id, NodeId w2id) {
    NodeId zid = g.constant(z);
    NodeId d = g.mean(g.matmul(g.relu(g.matmul(zid, w1id)), w2id));
    GradientMap inner = backward(g, d, std::vector<NodeId>{zid});
    return g.l2_norm(inner.node(zid));
  };

  double e1 = check_gradient(
      [&](Graph& g, NodeId w) {
        return norm_of_input_grad(g, w, g.constant(w2));
      },
      w1, eps);
  double e2 = check_gradient(
      [&](Graph& g, NodeId w) {
        return norm_of_input_grad(g, g.constant(w1), w);
      },
      w2, eps);
  return std::max(e1, e2);
}

}  // namespace ladapt

#endif  // LADAPT_GRADCHECK_HPP_
