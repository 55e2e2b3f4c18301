// Copyright 2026 The sefx Authors.
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

#ifndef SEFX_AUTODIFF_HPP_
#define SEFX_AUTODIFF_HPP_

#include <functional>
#include <vector>

#include "sefx/tensor.hpp"

namespace sefx {
namespace ad {

// Reverse-mode tape. Each training step builds a fresh tape; nodes are
// appended in topological order, so a single reverse sweep propagates
// gradients. Handles are indices to keep lambdas valid across vector
// growth.
using Var = int;

struct Node {
  Tensor value;
  Tensor grad;  // allocated lazily on first touch
  bool requires_grad = false;
  // Receives the node's own output gradient; must accumulate into parents.
  std::function<void(class Tape&, const Tensor&)> backward;
};

class Tape {
 public:
  Var Leaf(Tensor value, bool requires_grad);
  Var Emit(Tensor value, bool requires_grad,
           std::function<void(Tape&, const Tensor&)> backward);

  const Tensor& val(Var i) const { return nodes_[i].value; }
  Tensor& grad(Var i);
  bool needs_grad(Var i) const { return nodes_[i].requires_grad; }
  bool has_grad(Var i) const { return !nodes_[i].grad.empty(); }
  std::size_t size() const { return nodes_.size(); }

  // Seeds d(root)/d(root) = 1 (root must be 1x1) and sweeps the tape in
  // reverse, accumulating into every reachable grad.
  void Backward(Var root);

 private:
  std::vector<Node> nodes_;
};

// Elementwise and structural ops. All return a new node.
Var Add(Tape& t, Var a, Var b);
Var Sub(Tape& t, Var a, Var b);
Var Mul(Tape& t, Var a, Var b);
Var Scale(Tape& t, Var a, double c);
Var AddConst(Tape& t, Var a, double c);
Var AddBias(Tape& t, Var x, Var bias);  // x[F,C] + bias[1,C] per row
Var Square(Tape& t, Var a);
Var Sum(Tape& t, Var a);   // -> [1,1]
Var Mean(Tape& t, Var a);  // -> [1,1]
Var Ln(Tape& t, Var a);    // values must be > 0
Var LogFloored(Tape& t, Var a, double floor);  // ln(max(a, floor))
Var Tanh(Tape& t, Var a);
Var Sigmoid(Tape& t, Var a);
Var Relu(Tape& t, Var a);
Var PRelu(Tape& t, Var x, Var alpha);  // alpha is [1,1]

Var MatMul(Tape& t, Var a, Var b);    // A[m,k] * B[k,n]
Var MatMulNT(Tape& t, Var a, Var b);  // A[m,k] * B[n,k]^T

Var UnfoldRows(Tape& t, Var x, int win, int hop);  // x[1,T] -> [F,win]
Var OverlapAdd(Tape& t, Var frames, int hop, int out_len);  // -> [1,out_len]
Var PadCols(Tape& t, Var x, int left, int right);
Var SliceCols(Tape& t, Var x, int start, int len);

Var GlobalLayerNorm(Tape& t, Var x, Var gamma, Var beta, double eps);
Var DepthwiseConv(Tape& t, Var x, Var w, int dilation);

Var SoftmaxRows(Tape& t, Var a);
Var LogSoftmaxRows(Tape& t, Var a);
// Mean over rows of -logp[row, target[row]].
Var NllRows(Tape& t, Var logp, const std::vector<int>& targets);
// CTC negative log-likelihood of the target label sequence given per-frame
// logits[F,V]; blank must not appear in targets.
Var CtcLoss(Tape& t, Var logits, const std::vector<int>& targets, int blank);

}  // namespace ad
}  // namespace sefx

#endif  // SEFX_AUTODIFF_HPP_
