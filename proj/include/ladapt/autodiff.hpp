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

#ifndef LADAPT_AUTODIFF_HPP_
#define LADAPT_AUTODIFF_HPP_

#include <cmath>
#include <cstdint>
#include <limits>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ladapt/graph.hpp"

namespace ladapt {

/// Gradients of one scalar with respect to a set of nodes. Entries are node
/// ids of adjoint values recorded on the same tape, so a gradient can itself
/// be differentiated again (double backprop) as long as every op on its path
/// has a differentiable backward rule.
class GradientMap {
 public:
  bool contains(NodeId wrt) const {
    return grads_.find(wrt.index) != grads_.end();
  }

  /// Adjoint node id for `wrt`; throws if absent.
  NodeId node(NodeId wrt) const {
    auto it = grads_.find(wrt.index);
    if (it == grads_.end()) {
      throw Error("GradientMap: no gradient recorded for node " +
                  std::to_string(wrt.index));
    }
    return it->second;
  }

  const Tensor& tensor(const Graph& g, NodeId wrt) const {
    return g.value(node(wrt));
  }

  std::size_t size() const { return grads_.size(); }

  const std::unordered_map<std::uint32_t, NodeId>& entries() const {
    return grads_;
  }

  void insert(NodeId wrt, NodeId grad) { grads_[wrt.index] = grad; }

 private:
  std::unordered_map<std::uint32_t, NodeId> grads_;
};

namespace detail {

/// Emits the backward rule of one node onto the tape, accumulating adjoint
/// contributions into `adj`. `accumulate` folds multiple contributions to
/// the same node with recorded add ops, keeping the whole pass
/// differentiable where the op set allows.
class BackwardPass {
 public:
  BackwardPass(Graph& g, NodeId loss) : g_(g), loss_(loss) {
    const Tensor& lv = g_.value(loss_);
    if (lv.size() != 1) {
      throw ShapeError("backward: expects a scalar node, got " +
                       shape_str(lv.shape()));
    }
    adj_.assign(loss_.index + 1, NodeId());
    adj_[loss_.index] = g_.constant(1.0);
  }

  /// Sweeps the tape in reverse. Adjoints only ever flow from a node to its
  /// lower-indexed inputs, so a pass that targets specific nodes may stop
  /// once the sweep drops below the lowest target: everything further down
  /// cannot influence the targets' adjoints.
  void run(std::uint32_t stop_at = 0) {
    for (std::uint32_t i = loss_.index + 1; i-- > stop_at;) {
      NodeId id(i);
      if (!adj_[i].valid()) continue;
      // Copy fields: emitting nodes may reallocate the tape.
      Op op = g_.node(id).op;
      if (op == Op::kLeaf) continue;
      std::vector<NodeId> in = g_.node(id).inputs;
      double scalar = g_.node(id).scalar;
      NodeId a = adj_[i];
      emit(op, id, in, scalar, a);
    }
  }

  NodeId adjoint(NodeId id) const {
    return id.index < adj_.size() ? adj_[id.index] : NodeId();
  }

  /// Nodes reachable from the loss through data dependencies.
  std::vector<bool> reachable() const {
    std::vector<bool> seen(loss_.index + 1, false);
    std::vector<std::uint32_t> stack{loss_.index};
    seen[loss_.index] = true;
    while (!stack.empty()) {
      std::uint32_t i = stack.back();
      stack.pop_back();
      for (NodeId in : g_.node(NodeId(i)).inputs) {
        if (in.index <= loss_.index && !seen[in.index]) {
          seen[in.index] = true;
          stack.push_back(in.index);
        }
      }
    }
    return seen;
  }

 private:
  void accumulate(NodeId target, NodeId contribution) {
    if (target.index >= adj_.size()) return;
    NodeId& slot = adj_[target.index];
    slot = slot.valid() ? g_.add(slot, contribution) : contribution;
  }

  void emit(Op op, NodeId self, const std::vector<NodeId>& in, double scalar,
            NodeId a) {
    switch (op) {
      case Op::kAdd:
        accumulate(in[0], a);
        accumulate(in[1], a);
        break;
      case Op::kSubtract:
        accumulate(in[0], a);
        accumulate(in[1], g_.mul_scalar(a, -1.0));
        break;
      case Op::kMul:
        accumulate(in[0], g_.mul(a, in[1]));
        accumulate(in[1], g_.mul(a, in[0]));
        break;
      case Op::kDiv: {
        accumulate(in[0], g_.div(a, in[1]));
        NodeId t = g_.div(g_.mul(a, in[0]), g_.square(in[1]));
        accumulate(in[1], g_.mul_scalar(t, -1.0));
        break;
      }
      case Op::kMulScalar:
        accumulate(in[0], g_.mul_scalar(a, scalar));
        break;
      case Op::kGrl:
        accumulate(in[0], g_.mul_scalar(a, -scalar));
        break;
      case Op::kSquare:
        accumulate(in[0], g_.mul_scalar(g_.mul(a, in[0]), 2.0));
        break;
      case Op::kRelu:
        accumulate(in[0], g_.mul(a, g_.relu_mask(in[0])));
        break;
      case Op::kReluMask:
        // Derivative of an a.e. constant function: contributes nothing.
        break;
      case Op::kMatmul:
        accumulate(in[0], g_.matmul(a, g_.transpose(in[1])));
        accumulate(in[1], g_.matmul(g_.transpose(in[0]), a));
        break;
      case Op::kTranspose:
        accumulate(in[0], g_.transpose(a));
        break;
      case Op::kConv1x1: {
        Shape xshape = g_.shape(in[0]);
        std::size_t cin = xshape.back();
        std::size_t cout = g_.shape(in[1])[1];
        std::size_t positions = shape_numel(xshape) / cin;
        NodeId adj_flat = g_.reshape(a, {positions, cout});
        NodeId x_flat = g_.reshape(in[0], {positions, cin});
        accumulate(in[0], g_.reshape(g_.matmul(adj_flat, g_.transpose(in[1])),
                                     xshape));
        accumulate(in[1], g_.matmul(g_.transpose(x_flat), adj_flat));
        break;
      }
      case Op::kSum:
        accumulate(in[0], g_.broadcast(a, g_.shape(in[0])));
        break;
      case Op::kMean: {
        double inv = 1.0 / static_cast<double>(g_.value(in[0]).size());
        accumulate(in[0], g_.mul_scalar(g_.broadcast(a, g_.shape(in[0])), inv));
        break;
      }
      case Op::kL2Norm: {
        // d||x|| / dx = x / ||x||; tiny offset guards the origin.
        NodeId denom = g_.add(self, g_.constant(1e-30));
        NodeId q = g_.div(a, denom);
        accumulate(in[0], g_.mul(in[0], g_.broadcast(q, g_.shape(in[0]))));
        break;
      }
      case Op::kRowL2Norm: {
        std::size_t rows = g_.shape(self)[0];
        NodeId denom = g_.add(self, g_.constant(Tensor::filled({rows}, 1e-30)));
        NodeId q = g_.div(a, denom);
        accumulate(in[0], g_.row_scale(in[0], q));
        break;
      }
      case Op::kRowScale:
        accumulate(in[0], g_.row_scale(a, in[1]));
        accumulate(in[1], g_.row_sum(g_.mul(a, in[0])));
        break;
      case Op::kRowSum:
        accumulate(in[0], g_.row_broadcast(a, g_.shape(in[0])[1]));
        break;
      case Op::kRowBroadcast:
        accumulate(in[0], g_.row_sum(a));
        break;
      case Op::kBroadcast:
        accumulate(in[0], g_.sum(a));
        break;
      case Op::kReshape:
        accumulate(in[0], g_.reshape(a, g_.shape(in[0])));
        break;
      case Op::kGlobalAvgPool:
        emit_gap_grad(self, in, a);
        break;
      case Op::kConv3x3:
        emit_conv3x3_grad(in, a);
        break;
      case Op::kConcat:
        emit_concat_grad(in, a);
        break;
      case Op::kSoftmaxXent:
        emit_softmax_xent_grad(self, in, a);
        break;
      case Op::kBatchNorm:
        emit_batchnorm_grad(self, in, scalar, a);
        break;
      case Op::kBatchNormEval:
        emit_batchnorm_eval_grad(in, scalar, a);
        break;
      case Op::kOpaqueGrad:
        throw UnsupportedOpError(
            "backward: cannot differentiate through the gradient of '" +
            g_.node(self).note +
            "' (op outside the double-backprop subset)");
      case Op::kLeaf:
        break;
    }
  }

  void emit_gap_grad(NodeId self, const std::vector<NodeId>& in, NodeId a) {
    Shape xshape = g_.shape(in[0]);
    bool batched = xshape.size() == 4;
    std::size_t N = batched ? xshape[0] : 1;
    std::size_t H = xshape[batched ? 1 : 0];
    std::size_t W = xshape[batched ? 2 : 1];
    std::size_t C = xshape[batched ? 3 : 2];
    const Tensor& A = g_.value(a);
    Tensor dx(xshape);
    double inv = 1.0 / static_cast<double>(H * W);
    for (std::size_t b = 0; b < N; ++b) {
      for (std::size_t p = 0; p < H * W; ++p) {
        for (std::size_t c = 0; c < C; ++c) {
          dx[(b * H * W + p) * C + c] = A[b * C + c] * inv;
        }
      }
    }
    (void)self;
    accumulate(in[0], g_.opaque_grad(std::move(dx), {a}, "global-avg-pool"));
  }

  void emit_conv3x3_grad(const std::vector<NodeId>& in, NodeId a) {
    const Tensor& X = g_.value(in[0]);
    const Tensor& K = g_.value(in[1]);
    const Tensor& A = g_.value(a);
    std::size_t N = X.dim(0), H = X.dim(1), W = X.dim(2), cin = X.dim(3);
    std::size_t cout = K.dim(3);
    std::size_t oh = H - 2, ow = W - 2;
    auto kat = [&](std::size_t di, std::size_t dj, std::size_t c,
                   std::size_t o) {
      return K[((di * 3 + dj) * cin + c) * cout + o];
    };
    auto aat = [&](std::size_t b, std::size_t i, std::size_t j,
                   std::size_t o) {
      return A[((b * oh + i) * ow + j) * cout + o];
    };
    Tensor dx(X.shape());
    Tensor dk(K.shape());
    for (std::size_t b = 0; b < N; ++b) {
      for (std::size_t i = 0; i < oh; ++i) {
        for (std::size_t j = 0; j < ow; ++j) {
          for (std::size_t o = 0; o < cout; ++o) {
            double up = aat(b, i, j, o);
            if (up == 0.0) continue;
            for (std::size_t di = 0; di < 3; ++di) {
              for (std::size_t dj = 0; dj < 3; ++dj) {
                for (std::size_t c = 0; c < cin; ++c) {
                  dx[((b * H + i + di) * W + j + dj) * cin + c] +=
                      up * kat(di, dj, c, o);
                  dk[((di * 3 + dj) * cin + c) * cout + o] +=
                      up * X[((b * H + i + di) * W + j + dj) * cin + c];
                }
              }
            }
          }
        }
      }
    }
    accumulate(in[0], g_.opaque_grad(std::move(dx), {in[1], a}, "conv3x3"));
    accumulate(in[1], g_.opaque_grad(std::move(dk), {in[0], a}, "conv3x3"));
  }

  void emit_concat_grad(const std::vector<NodeId>& in, NodeId a) {
    const Tensor& A = g_.value(a);
    std::size_t offset = 0;
    for (NodeId part : in) {
      const Tensor& pv = g_.value(part);
      Tensor slice(pv.shape());
      std::copy(A.values().begin() + static_cast<std::ptrdiff_t>(offset),
                A.values().begin() +
                    static_cast<std::ptrdiff_t>(offset + pv.size()),
                slice.values().begin());
      offset += pv.size();
      accumulate(part, g_.opaque_grad(std::move(slice), {a}, "concat"));
    }
  }

  void emit_softmax_xent_grad(NodeId self, const std::vector<NodeId>& in,
                              NodeId a) {
    const Tensor& L = g_.value(in[0]);
    const std::vector<int>& labels = g_.node(self).labels;
    std::size_t B = L.rank() == 2 ? L.dim(0) : 1;
    std::size_t N = L.rank() == 2 ? L.dim(1) : L.dim(0);
    double upstream = g_.value(a)[0] / static_cast<double>(B);
    Tensor dl(L.shape());
    for (std::size_t b = 0; b < B; ++b) {
      const double* row = L.data() + b * N;
      double mx = row[0];
      for (std::size_t j = 1; j < N; ++j) mx = std::max(mx, row[j]);
      double z = 0.0;
      for (std::size_t j = 0; j < N; ++j) z += std::exp(row[j] - mx);
      for (std::size_t j = 0; j < N; ++j) {
        double p = std::exp(row[j] - mx) / z;
        double onehot = (static_cast<std::size_t>(labels[b]) == j) ? 1.0 : 0.0;
        dl[b * N + j] = (p - onehot) * upstream;
      }
    }
    accumulate(in[0],
               g_.opaque_grad(std::move(dl), {in[0], a}, "softmax-cross-entropy"));
  }

  void emit_batchnorm_grad(NodeId self, const std::vector<NodeId>& in,
                           double eps, NodeId a) {
    const Tensor& X = g_.value(in[0]);
    const Tensor& G = g_.value(in[1]);
    const Tensor& A = g_.value(a);
    auto [rows, C] = Graph::bn_dims(X);
    std::vector<double> mean(C), var(C);
    Graph::bn_batch_stats(X, rows, C, mean, var);
    std::vector<double> inv_sd(C);
    for (std::size_t c = 0; c < C; ++c) inv_sd[c] = 1.0 / std::sqrt(var[c] + eps);

    Tensor dgamma({C}), dbeta({C});
    std::vector<double> mean_dy(C, 0.0), mean_dy_xhat(C, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < C; ++c) {
        double xhat = (X[r * C + c] - mean[c]) * inv_sd[c];
        double dy = A[r * C + c];
        dgamma[c] += dy * xhat;
        dbeta[c] += dy;
        mean_dy[c] += dy;
        mean_dy_xhat[c] += dy * xhat;
      }
    }
    double inv_rows = 1.0 / static_cast<double>(rows);
    for (std::size_t c = 0; c < C; ++c) {
      mean_dy[c] *= inv_rows;
      mean_dy_xhat[c] *= inv_rows;
    }
    Tensor dx(X.shape());
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < C; ++c) {
        double xhat = (X[r * C + c] - mean[c]) * inv_sd[c];
        dx[r * C + c] = G[c] * inv_sd[c] *
                        (A[r * C + c] - mean_dy[c] - xhat * mean_dy_xhat[c]);
      }
    }
    (void)self;
    accumulate(in[0], g_.opaque_grad(std::move(dx), {in[0], in[1], a},
                                     "batchnorm"));
    accumulate(in[1], g_.opaque_grad(std::move(dgamma), {in[0], a},
                                     "batchnorm"));
    accumulate(in[2], g_.opaque_grad(std::move(dbeta), {a}, "batchnorm"));
  }

  void emit_batchnorm_eval_grad(const std::vector<NodeId>& in, double eps,
                                NodeId a) {
    const Tensor& X = g_.value(in[0]);
    const Tensor& G = g_.value(in[1]);
    const Tensor& M = g_.value(in[3]);
    const Tensor& V = g_.value(in[4]);
    const Tensor& A = g_.value(a);
    auto [rows, C] = Graph::bn_dims(X);
    std::vector<double> inv_sd(C);
    for (std::size_t c = 0; c < C; ++c) inv_sd[c] = 1.0 / std::sqrt(V[c] + eps);
    Tensor dx(X.shape()), dgamma({C}), dbeta({C});
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < C; ++c) {
        double xhat = (X[r * C + c] - M[c]) * inv_sd[c];
        double dy = A[r * C + c];
        dx[r * C + c] = dy * G[c] * inv_sd[c];
        dgamma[c] += dy * xhat;
        dbeta[c] += dy;
      }
    }
    // Running statistics are constants; they receive no gradient.
    accumulate(in[0], g_.opaque_grad(std::move(dx), {in[1], in[3], in[4], a},
                                     "batchnorm-eval"));
    accumulate(in[1], g_.opaque_grad(std::move(dgamma),
                                     {in[0], in[3], in[4], a},
                                     "batchnorm-eval"));
    accumulate(in[2], g_.opaque_grad(std::move(dbeta), {a}, "batchnorm-eval"));
  }

  Graph& g_;
  NodeId loss_;
  std::vector<NodeId> adj_;
};

}  // namespace detail

/// Reverse accumulation of d(loss)/d(leaf) for every leaf reachable from the
/// scalar `loss`. Leaves reachable only through derivative-free paths get an
/// explicit zero entry. The adjoint computations are recorded on the tape,
/// so entries can be differentiated again where the op set allows.
inline GradientMap backward(Graph& g, NodeId loss) {
  detail::BackwardPass pass(g, loss);
  pass.run();
  std::vector<bool> reach = pass.reachable();
  GradientMap out;
  for (std::uint32_t i = 0; i <= loss.index; ++i) {
    if (!reach[i]) continue;
    NodeId id(i);
    if (g.node(id).op != Op::kLeaf) continue;
    NodeId a = pass.adjoint(id);
    if (!a.valid()) a = g.constant(Tensor(g.shape(id)));
    out.insert(id, a);
  }
  return out;
}

/// Reverse accumulation targeting an explicit node set (the nodes need not
/// be leaves). Unreached targets get zero gradients. The sweep stops below
/// the lowest target, so nothing is recorded for earlier graph regions.
inline GradientMap backward(Graph& g, NodeId loss,
                            const std::vector<NodeId>& wrt) {
  if (wrt.empty()) throw Error("backward: empty target set");
  std::uint32_t stop_at = UINT32_MAX;
  for (NodeId id : wrt) stop_at = std::min(stop_at, id.index);
  detail::BackwardPass pass(g, loss);
  pass.run(stop_at);
  GradientMap out;
  for (NodeId id : wrt) {
    NodeId a = pass.adjoint(id);
    if (!a.valid()) a = g.constant(Tensor(g.shape(id)));
    out.insert(id, a);
  }
  return out;
}

/// Compares the analytic gradient of a scalar-valued builder against central
/// finite differences. `build` maps (graph, input node) to a scalar node.
/// Returns max over coordinates of |analytic - numeric| / max(1, |analytic|);
/// non-finite differences yield +infinity.
template <typename BuildFn>
double check_gradient(BuildFn&& build, const Tensor& x, double eps) {
  if (eps <= 0.0) throw Error("check_gradient: eps must be positive");
  Tensor analytic;
  try {
    Graph g;
    NodeId xid = g.leaf(x, /*trainable=*/true, "x");
    NodeId out = build(g, xid);
    GradientMap gm = backward(g, out, std::vector<NodeId>{xid});
    analytic = gm.tensor(g, xid);
  } catch (const NumericError&) {
    return std::numeric_limits<double>::infinity();
  }

  auto eval = [&](const Tensor& probe) {
    Graph g;
    NodeId xid = g.leaf(probe, /*trainable=*/true, "x");
    NodeId out = build(g, xid);
    return g.value(out)[0];
  };

  double max_err = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    Tensor hi = x, lo = x;
    hi[i] += eps;
    lo[i] -= eps;
    double fd;
    try {
      fd = (eval(hi) - eval(lo)) / (2.0 * eps);
    } catch (const NumericError&) {
      return std::numeric_limits<double>::infinity();
    }
    if (!std::isfinite(fd) || !std::isfinite(analytic[i])) {
      return std::numeric_limits<double>::infinity();
    }
    double err = std::abs(analytic[i] - fd) /
                 std::max(1.0, std::abs(analytic[i]));
    max_err = std::max(max_err, err);
  }
  return max_err;
}

}  // namespace ladapt

#endif  // LADAPT_AUTODIFF_HPP_
