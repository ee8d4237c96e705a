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

#ifndef LADAPT_GRAPH_HPP_
#define LADAPT_GRAPH_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ladapt/errors.hpp"
#include "ladapt/tensor.hpp"

namespace ladapt {

/// Operation kinds recordable on the tape. The first block is the public
/// surface; the second block holds helper kinds the backward pass emits so
/// that gradients stay differentiable. kOpaqueGrad marks gradient values
/// whose own derivative is intentionally unavailable.
enum class Op : std::uint8_t {
  kLeaf,
  kMatmul,
  kConv1x1,
  kConv3x3,
  kAdd,
  kSubtract,
  kMulScalar,
  kRelu,
  kBatchNorm,
  kBatchNormEval,
  kGlobalAvgPool,
  kConcat,
  kSum,
  kMean,
  kL2Norm,
  kSoftmaxXent,
  kSquare,
  // Helper kinds (emitted by backward, also recordable directly).
  kMul,
  kDiv,
  kReluMask,
  kTranspose,
  kReshape,
  kBroadcast,
  kRowL2Norm,
  kRowScale,
  kRowSum,
  kRowBroadcast,
  kGrl,
  kOpaqueGrad,
};

inline const char* op_name(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kMatmul: return "matmul";
    case Op::kConv1x1: return "conv1x1";
    case Op::kConv3x3: return "conv3x3";
    case Op::kAdd: return "add";
    case Op::kSubtract: return "subtract";
    case Op::kMulScalar: return "mul-by-scalar";
    case Op::kRelu: return "relu";
    case Op::kBatchNorm: return "batchnorm";
    case Op::kBatchNormEval: return "batchnorm-eval";
    case Op::kGlobalAvgPool: return "global-avg-pool";
    case Op::kConcat: return "concat";
    case Op::kSum: return "sum";
    case Op::kMean: return "mean";
    case Op::kL2Norm: return "l2-norm";
    case Op::kSoftmaxXent: return "softmax-cross-entropy";
    case Op::kSquare: return "square";
    case Op::kMul: return "mul";
    case Op::kDiv: return "div";
    case Op::kReluMask: return "relu-mask";
    case Op::kTranspose: return "transpose";
    case Op::kReshape: return "reshape";
    case Op::kBroadcast: return "broadcast";
    case Op::kRowL2Norm: return "row-l2-norm";
    case Op::kRowScale: return "row-scale";
    case Op::kRowSum: return "row-sum";
    case Op::kRowBroadcast: return "row-broadcast";
    case Op::kGrl: return "grl";
    case Op::kOpaqueGrad: return "opaque-grad";
  }
  return "?";
}

/// Index of a node on the tape.
struct NodeId {
  std::uint32_t index = UINT32_MAX;

  constexpr NodeId() = default;
  constexpr explicit NodeId(std::uint32_t i) : index(i) {}
  constexpr bool valid() const { return index != UINT32_MAX; }
  friend constexpr bool operator==(NodeId a, NodeId b) {
    return a.index == b.index;
  }
};

struct Node {
  Op op = Op::kLeaf;
  std::vector<NodeId> inputs;
  Tensor value;
  bool trainable = false;   // leaves only
  double scalar = 0.0;      // kMulScalar / kGrl factor, kBatchNorm epsilon
  std::vector<int> labels;  // kSoftmaxXent class indices
  std::string note;         // leaf name, or originating op for kOpaqueGrad
};

/// Append-only tape of eagerly evaluated operations.
///
/// Recording an op validates input shapes, computes the output immediately
/// and rejects non-finite results. A node's inputs always precede it, so a
/// reverse sweep over indices is a valid reverse-topological order. Graphs
/// are single-owner; Tensors read out of them are plain values.
class Graph {
 public:
  std::size_t size() const { return nodes_.size(); }

  const Node& node(NodeId id) const { return nodes_[id.index]; }
  const Tensor& value(NodeId id) const { return nodes_[id.index].value; }
  const Shape& shape(NodeId id) const { return nodes_[id.index].value.shape(); }

  NodeId leaf(Tensor value, bool trainable = false, std::string name = {}) {
    if (!value.all_finite()) {
      throw NumericError("leaf '" + name + "': non-finite input value");
    }
    Node n;
    n.op = Op::kLeaf;
    n.value = std::move(value);
    n.trainable = trainable;
    n.note = std::move(name);
    return push(std::move(n), /*check_finite=*/false);
  }

  NodeId constant(Tensor value) { return leaf(std::move(value)); }
  NodeId constant(double v) { return leaf(Tensor::scalar(v)); }

  // ---- arithmetic ---------------------------------------------------------

  NodeId add(NodeId a, NodeId b) { return elementwise(Op::kAdd, a, b); }
  NodeId subtract(NodeId a, NodeId b) { return elementwise(Op::kSubtract, a, b); }
  NodeId mul(NodeId a, NodeId b) { return elementwise(Op::kMul, a, b); }
  NodeId div(NodeId a, NodeId b) { return elementwise(Op::kDiv, a, b); }

  NodeId mul_scalar(NodeId a, double c) {
    Node n = make(Op::kMulScalar, {a});
    n.scalar = c;
    n.value = value(a);
    for (double& v : n.value.values()) v *= c;
    return push(std::move(n));
  }

  NodeId square(NodeId a) {
    Node n = make(Op::kSquare, {a});
    n.value = value(a);
    for (double& v : n.value.values()) v *= v;
    return push(std::move(n));
  }

  NodeId relu(NodeId a) {
    Node n = make(Op::kRelu, {a});
    n.value = value(a);
    for (double& v : n.value.values()) v = v > 0.0 ? v : 0.0;
    return push(std::move(n));
  }

  /// 1 where the input is positive, else 0. Derivative of relu; its own
  /// derivative is zero almost everywhere and is treated as exactly zero.
  NodeId relu_mask(NodeId a) {
    Node n = make(Op::kReluMask, {a});
    n.value = value(a);
    for (double& v : n.value.values()) v = v > 0.0 ? 1.0 : 0.0;
    return push(std::move(n));
  }

  /// Gradient reversal: identity forward, upstream gradient multiplied by
  /// -scale on the way back.
  NodeId grl(NodeId a, double scale) {
    Node n = make(Op::kGrl, {a});
    n.scalar = scale;
    n.value = value(a);
    return push(std::move(n));
  }

  // ---- linear algebra ------------------------------------------------------

  NodeId matmul(NodeId a, NodeId b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (A.rank() != 2 || B.rank() != 2 || A.dim(1) != B.dim(0)) {
      throw ShapeError(std::string("matmul: incompatible shapes ") +
                       shape_str(A.shape()) + " x " + shape_str(B.shape()));
    }
    std::size_t m = A.dim(0), k = A.dim(1), p = B.dim(1);
    Node n = make(Op::kMatmul, {a, b});
    n.value = Tensor({m, p});
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < p; ++j) {
        double acc = 0.0;
        for (std::size_t t = 0; t < k; ++t) {
          acc += A[i * k + t] * B[t * p + j];
        }
        n.value[i * p + j] = acc;
      }
    }
    return push(std::move(n));
  }

  NodeId transpose(NodeId a) {
    const Tensor& A = value(a);
    if (A.rank() != 2) {
      throw ShapeError("transpose: expects rank 2, got " +
                       shape_str(A.shape()));
    }
    std::size_t m = A.dim(0), k = A.dim(1);
    Node n = make(Op::kTranspose, {a});
    n.value = Tensor({k, m});
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        n.value[j * m + i] = A[i * k + j];
      }
    }
    return push(std::move(n));
  }

  /// 1x1 convolution over the channel axis: input [..., Cin] (rank 3 or 4),
  /// kernel [Cin, Cout]. Equivalent to a matmul applied at every spatial
  /// position; no padding, no bias.
  NodeId conv1x1(NodeId x, NodeId k) {
    const Tensor& X = value(x);
    const Tensor& K = value(k);
    if ((X.rank() != 3 && X.rank() != 4) || K.rank() != 2) {
      throw ShapeError(std::string("conv1x1: expects input rank 3/4 and "
                                   "kernel rank 2, got ") +
                       shape_str(X.shape()) + " and " + shape_str(K.shape()));
    }
    std::size_t cin = X.shape().back();
    if (cin != K.dim(0)) {
      throw ShapeError("conv1x1: input channels " + std::to_string(cin) +
                       " != kernel rows " + std::to_string(K.dim(0)));
    }
    std::size_t cout = K.dim(1);
    std::size_t positions = X.size() / cin;
    Shape out_shape = X.shape();
    out_shape.back() = cout;
    Node n = make(Op::kConv1x1, {x, k});
    n.value = Tensor(out_shape);
    for (std::size_t p = 0; p < positions; ++p) {
      for (std::size_t j = 0; j < cout; ++j) {
        double acc = 0.0;
        for (std::size_t c = 0; c < cin; ++c) {
          acc += X[p * cin + c] * K[c * cout + j];
        }
        n.value[p * cout + j] = acc;
      }
    }
    return push(std::move(n));
  }

  /// Valid 3x3 convolution, stride 1, no padding, no bias.
  /// Input [N, H, W, Cin], kernel [3, 3, Cin, Cout] -> [N, H-2, W-2, Cout].
  NodeId conv3x3(NodeId x, NodeId k) {
    const Tensor& X = value(x);
    const Tensor& K = value(k);
    if (X.rank() != 4 || K.rank() != 4 || K.dim(0) != 3 || K.dim(1) != 3) {
      throw ShapeError(std::string("conv3x3: expects input [N,H,W,C] and "
                                   "kernel [3,3,Cin,Cout], got ") +
                       shape_str(X.shape()) + " and " + shape_str(K.shape()));
    }
    std::size_t N = X.dim(0), H = X.dim(1), W = X.dim(2), cin = X.dim(3);
    if (H < 3 || W < 3) {
      throw ShapeError("conv3x3: spatial extents " + shape_str(X.shape()) +
                       " too small for a valid 3x3 window");
    }
    if (K.dim(2) != cin) {
      throw ShapeError("conv3x3: input channels " + std::to_string(cin) +
                       " != kernel channels " + std::to_string(K.dim(2)));
    }
    std::size_t cout = K.dim(3);
    std::size_t oh = H - 2, ow = W - 2;
    Node n = make(Op::kConv3x3, {x, k});
    n.value = Tensor({N, oh, ow, cout});
    auto xat = [&](std::size_t b, std::size_t i, std::size_t j,
                   std::size_t c) { return X[((b * H + i) * W + j) * cin + c]; };
    auto kat = [&](std::size_t di, std::size_t dj, std::size_t c,
                   std::size_t o) {
      return K[((di * 3 + dj) * cin + c) * cout + o];
    };
    for (std::size_t b = 0; b < N; ++b) {
      for (std::size_t i = 0; i < oh; ++i) {
        for (std::size_t j = 0; j < ow; ++j) {
          for (std::size_t o = 0; o < cout; ++o) {
            double acc = 0.0;
            for (std::size_t di = 0; di < 3; ++di) {
              for (std::size_t dj = 0; dj < 3; ++dj) {
                for (std::size_t c = 0; c < cin; ++c) {
                  acc += xat(b, i + di, j + dj, c) * kat(di, dj, c, o);
                }
              }
            }
            n.value[((b * oh + i) * ow + j) * cout + o] = acc;
          }
        }
      }
    }
    return push(std::move(n));
  }

  // ---- shape ops -----------------------------------------------------------

  NodeId reshape(NodeId a, Shape target) {
    const Tensor& A = value(a);
    if (shape_numel(target) != A.size()) {
      throw ShapeError("reshape: cannot view " + shape_str(A.shape()) +
                       " as " + shape_str(target));
    }
    Node n = make(Op::kReshape, {a});
    n.value = Tensor(std::move(target), A.values());
    return push(std::move(n), /*check_finite=*/false);
  }

  /// Replicate a scalar [1] to an arbitrary shape.
  NodeId broadcast(NodeId a, Shape target) {
    const Tensor& A = value(a);
    if (A.size() != 1) {
      throw ShapeError("broadcast: expects a scalar input, got " +
                       shape_str(A.shape()));
    }
    Node n = make(Op::kBroadcast, {a});
    n.value = Tensor::filled(std::move(target), A[0]);
    return push(std::move(n), /*check_finite=*/false);
  }

  /// Concatenate along axis 0; trailing extents must agree.
  NodeId concat(const std::vector<NodeId>& parts) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    Shape tail = value(parts[0]).shape();
    tail.erase(tail.begin());
    std::size_t rows = 0;
    for (NodeId p : parts) {
      Shape t = value(p).shape();
      std::size_t r = t[0];
      t.erase(t.begin());
      if (t != tail) {
        throw ShapeError(std::string("concat: trailing dims differ: ") +
                         shape_str(value(parts[0]).shape()) + " vs " +
                         shape_str(value(p).shape()));
      }
      rows += r;
    }
    Shape out = value(parts[0]).shape();
    out[0] = rows;
    Node n = make(Op::kConcat, parts);
    n.value = Tensor(out);
    std::size_t offset = 0;
    for (NodeId p : parts) {
      const Tensor& t = value(p);
      std::copy(t.values().begin(), t.values().end(),
                n.value.values().begin() + static_cast<std::ptrdiff_t>(offset));
      offset += t.size();
    }
    return push(std::move(n), /*check_finite=*/false);
  }

  // ---- reductions ----------------------------------------------------------

  NodeId sum(NodeId a) {
    Node n = make(Op::kSum, {a});
    double acc = 0.0;
    for (double v : value(a).values()) acc += v;
    n.value = Tensor::scalar(acc);
    return push(std::move(n));
  }

  NodeId mean(NodeId a) {
    Node n = make(Op::kMean, {a});
    double acc = 0.0;
    for (double v : value(a).values()) acc += v;
    n.value = Tensor::scalar(acc / static_cast<double>(value(a).size()));
    return push(std::move(n));
  }

  NodeId l2_norm(NodeId a) {
    Node n = make(Op::kL2Norm, {a});
    double acc = 0.0;
    for (double v : value(a).values()) acc += v * v;
    n.value = Tensor::scalar(std::sqrt(acc));
    return push(std::move(n));
  }

  /// Global average pool over spatial positions: [H,W,C] -> [C] or
  /// [N,H,W,C] -> [N,C]. This is the squeeze transform applied to a map.
  NodeId global_avg_pool(NodeId a) {
    const Tensor& X = value(a);
    if (X.rank() != 3 && X.rank() != 4) {
      throw ShapeError("global-avg-pool: expects rank 3 or 4, got " +
                       shape_str(X.shape()));
    }
    bool batched = X.rank() == 4;
    std::size_t N = batched ? X.dim(0) : 1;
    std::size_t H = X.dim(batched ? 1 : 0);
    std::size_t W = X.dim(batched ? 2 : 1);
    std::size_t C = X.dim(batched ? 3 : 2);
    Node n = make(Op::kGlobalAvgPool, {a});
    n.value = batched ? Tensor({N, C}) : Tensor({C});
    double inv = 1.0 / static_cast<double>(H * W);
    for (std::size_t b = 0; b < N; ++b) {
      for (std::size_t c = 0; c < C; ++c) {
        double acc = 0.0;
        for (std::size_t p = 0; p < H * W; ++p) {
          acc += X[(b * H * W + p) * C + c];
        }
        n.value[b * C + c] = acc * inv;
      }
    }
    return push(std::move(n));
  }

  // ---- row-wise ops (batch [B, C] with a per-row vector [B]) ---------------

  NodeId row_l2_norm(NodeId a) {
    const Tensor& X = value(a);
    require_rank2("row-l2-norm", X);
    std::size_t B = X.dim(0), C = X.dim(1);
    Node n = make(Op::kRowL2Norm, {a});
    n.value = Tensor({B});
    for (std::size_t b = 0; b < B; ++b) {
      double acc = 0.0;
      for (std::size_t c = 0; c < C; ++c) {
        double v = X[b * C + c];
        acc += v * v;
      }
      n.value[b] = std::sqrt(acc);
    }
    return push(std::move(n));
  }

  NodeId row_scale(NodeId a, NodeId s) {
    const Tensor& X = value(a);
    const Tensor& S = value(s);
    require_rank2("row-scale", X);
    if (S.rank() != 1 || S.dim(0) != X.dim(0)) {
      throw ShapeError(std::string("row-scale: scale shape ") +
                       shape_str(S.shape()) + " does not match rows of " +
                       shape_str(X.shape()));
    }
    std::size_t B = X.dim(0), C = X.dim(1);
    Node n = make(Op::kRowScale, {a, s});
    n.value = Tensor(X.shape());
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t c = 0; c < C; ++c) {
        n.value[b * C + c] = X[b * C + c] * S[b];
      }
    }
    return push(std::move(n));
  }

  NodeId row_sum(NodeId a) {
    const Tensor& X = value(a);
    require_rank2("row-sum", X);
    std::size_t B = X.dim(0), C = X.dim(1);
    Node n = make(Op::kRowSum, {a});
    n.value = Tensor({B});
    for (std::size_t b = 0; b < B; ++b) {
      double acc = 0.0;
      for (std::size_t c = 0; c < C; ++c) acc += X[b * C + c];
      n.value[b] = acc;
    }
    return push(std::move(n));
  }

  NodeId row_broadcast(NodeId s, std::size_t cols) {
    const Tensor& S = value(s);
    if (S.rank() != 1) {
      throw ShapeError("row-broadcast: expects rank 1, got " +
                       shape_str(S.shape()));
    }
    std::size_t B = S.dim(0);
    Node n = make(Op::kRowBroadcast, {s});
    n.value = Tensor({B, cols});
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t c = 0; c < cols; ++c) n.value[b * cols + c] = S[b];
    }
    return push(std::move(n), /*check_finite=*/false);
  }

  // ---- normalization -------------------------------------------------------

  /// Batch normalization with per-batch statistics (training mode).
  /// Input [N, C] (features on axis 1) or [N, H, W, C] (channels on axis 3);
  /// gamma and beta are [C]. Variance is the biased estimate.
  NodeId batchnorm(NodeId x, NodeId gamma, NodeId beta, double eps = 1e-5) {
    const Tensor& X = value(x);
    auto [rows, C] = bn_dims(X);
    check_bn_params("batchnorm", C, value(gamma), value(beta));
    Node n = make(Op::kBatchNorm, {x, gamma, beta});
    n.scalar = eps;
    n.value = Tensor(X.shape());
    std::vector<double> mean(C, 0.0), var(C, 0.0);
    bn_batch_stats(X, rows, C, mean, var);
    const Tensor& G = value(gamma);
    const Tensor& Bt = value(beta);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < C; ++c) {
        double xhat = (X[r * C + c] - mean[c]) / std::sqrt(var[c] + eps);
        n.value[r * C + c] = G[c] * xhat + Bt[c];
      }
    }
    return push(std::move(n));
  }

  /// Batch normalization with fixed statistics (evaluation mode).
  NodeId batchnorm_eval(NodeId x, NodeId gamma, NodeId beta, NodeId mean,
                        NodeId var, double eps = 1e-5) {
    const Tensor& X = value(x);
    auto [rows, C] = bn_dims(X);
    check_bn_params("batchnorm-eval", C, value(gamma), value(beta));
    const Tensor& M = value(mean);
    const Tensor& V = value(var);
    if (M.size() != C || V.size() != C) {
      throw ShapeError("batchnorm-eval: running stats size " +
                       std::to_string(M.size()) + "/" +
                       std::to_string(V.size()) + " != channels " +
                       std::to_string(C));
    }
    Node n = make(Op::kBatchNormEval, {x, gamma, beta, mean, var});
    n.scalar = eps;
    n.value = Tensor(X.shape());
    const Tensor& G = value(gamma);
    const Tensor& Bt = value(beta);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < C; ++c) {
        double xhat = (X[r * C + c] - M[c]) / std::sqrt(V[c] + eps);
        n.value[r * C + c] = G[c] * xhat + Bt[c];
      }
    }
    return push(std::move(n));
  }

  // ---- losses --------------------------------------------------------------

  /// Mean softmax cross entropy. Logits [B, N] with one label per row, or a
  /// single logit vector [N] with one label. Computed with max subtraction.
  NodeId softmax_xent(NodeId logits, std::vector<int> labels) {
    const Tensor& L = value(logits);
    std::size_t B, N;
    if (L.rank() == 2) {
      B = L.dim(0);
      N = L.dim(1);
    } else if (L.rank() == 1) {
      B = 1;
      N = L.dim(0);
    } else {
      throw ShapeError("softmax-cross-entropy: expects rank 1 or 2, got " +
                       shape_str(L.shape()));
    }
    if (labels.size() != B) {
      throw ShapeError("softmax-cross-entropy: " + std::to_string(B) +
                       " rows but " + std::to_string(labels.size()) +
                       " labels");
    }
    for (int y : labels) {
      if (y < 0 || static_cast<std::size_t>(y) >= N) {
        throw ShapeError("softmax-cross-entropy: label " + std::to_string(y) +
                         " out of range [0, " + std::to_string(N) + ")");
      }
    }
    Node n = make(Op::kSoftmaxXent, {logits});
    n.labels = labels;
    double total = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
      const double* row = L.data() + b * N;
      double mx = row[0];
      for (std::size_t j = 1; j < N; ++j) mx = std::max(mx, row[j]);
      double lse = 0.0;
      for (std::size_t j = 0; j < N; ++j) lse += std::exp(row[j] - mx);
      lse = std::log(lse) + mx;
      total += lse - row[static_cast<std::size_t>(labels[b])];
    }
    n.value = Tensor::scalar(total / static_cast<double>(B));
    return push(std::move(n));
  }

  /// A gradient value computed outside the differentiable op set. Carries
  /// its real data dependencies so that a second differentiation reaches it
  /// and fails loudly instead of silently treating it as a constant.
  NodeId opaque_grad(Tensor value, std::vector<NodeId> inputs,
                     const char* origin) {
    Node n;
    n.op = Op::kOpaqueGrad;
    n.inputs = std::move(inputs);
    n.value = std::move(value);
    n.note = origin;
    return push(std::move(n));
  }

  // BN batch statistics helper, shared with the backward pass.
  static void bn_batch_stats(const Tensor& X, std::size_t rows, std::size_t C,
                             std::vector<double>& mean,
                             std::vector<double>& var) {
    std::fill(mean.begin(), mean.end(), 0.0);
    std::fill(var.begin(), var.end(), 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < C; ++c) mean[c] += X[r * C + c];
    }
    double inv = 1.0 / static_cast<double>(rows);
    for (std::size_t c = 0; c < C; ++c) mean[c] *= inv;
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < C; ++c) {
        double d = X[r * C + c] - mean[c];
        var[c] += d * d;
      }
    }
    for (std::size_t c = 0; c < C; ++c) var[c] *= inv;
  }

  /// Reduction rows and channel count for a batchnorm input.
  static std::pair<std::size_t, std::size_t> bn_dims(const Tensor& X) {
    if (X.rank() == 2) return {X.dim(0), X.dim(1)};
    if (X.rank() == 4) return {X.dim(0) * X.dim(1) * X.dim(2), X.dim(3)};
    throw ShapeError("batchnorm: expects rank 2 or 4, got " +
                     shape_str(X.shape()));
  }

 private:
  Node make(Op op, std::vector<NodeId> inputs) const {
    Node n;
    n.op = op;
    n.inputs = std::move(inputs);
    for (NodeId id : n.inputs) {
      if (!id.valid() || id.index >= nodes_.size()) {
        throw Error(std::string(op_name(op)) + ": invalid input node id");
      }
    }
    return n;
  }

  NodeId elementwise(Op op, NodeId a, NodeId b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (!A.same_shape(B)) {
      throw ShapeError(std::string(op_name(op)) + ": shape mismatch " +
                       shape_str(A.shape()) + " vs " + shape_str(B.shape()));
    }
    Node n = make(op, {a, b});
    n.value = Tensor(A.shape());
    const std::size_t count = A.size();
    for (std::size_t i = 0; i < count; ++i) {
      switch (op) {
        case Op::kAdd: n.value[i] = A[i] + B[i]; break;
        case Op::kSubtract: n.value[i] = A[i] - B[i]; break;
        case Op::kMul: n.value[i] = A[i] * B[i]; break;
        case Op::kDiv: n.value[i] = A[i] / B[i]; break;
        default: throw Error("elementwise: bad op");
      }
    }
    return push(std::move(n));
  }

  static void require_rank2(const char* op, const Tensor& t) {
    if (t.rank() != 2) {
      throw ShapeError(std::string(op) + ": expects rank 2, got " +
                       shape_str(t.shape()));
    }
  }

  static void check_bn_params(const char* op, std::size_t C, const Tensor& g,
                              const Tensor& b) {
    if (g.size() != C || b.size() != C) {
      throw ShapeError(std::string(op) + ": gamma/beta sizes " +
                       std::to_string(g.size()) + "/" +
                       std::to_string(b.size()) + " != channels " +
                       std::to_string(C));
    }
  }

  NodeId push(Node n, bool check_finite = true) {
    if (check_finite && !n.value.all_finite()) {
      throw NumericError(std::string(op_name(n.op)) +
                         ": non-finite value produced");
    }
    nodes_.push_back(std::move(n));
    return NodeId(static_cast<std::uint32_t>(nodes_.size() - 1));
  }

  std::vector<Node> nodes_;
};

}  // namespace ladapt

#endif  // LADAPT_GRAPH_HPP_
