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

#include "sefx/autodiff.hpp"

#include <cassert>
#include <cmath>
#include <cstring>

#include "sefx/errors.hpp"
#include "sefx/kernels.hpp"

namespace sefx {
namespace ad {

namespace {
constexpr double kLogZero = -1e300;

inline double LogSumExp2(double a, double b) {
  if (a <= kLogZero) return b;
  if (b <= kLogZero) return a;
  const double m = a > b ? a : b;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

inline double LogSumExp3(double a, double b, double c) {
  return LogSumExp2(LogSumExp2(a, b), c);
}
}  // namespace

Var Tape::Leaf(Tensor value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return static_cast<Var>(nodes_.size()) - 1;
}

Var Tape::Emit(Tensor value, bool requires_grad,
               std::function<void(Tape&, const Tensor&)> backward) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return static_cast<Var>(nodes_.size()) - 1;
}

Tensor& Tape::grad(Var i) {
  Node& n = nodes_[i];
  if (n.grad.empty()) n.grad = Tensor::Zeros(n.value.rows, n.value.cols);
  return n.grad;
}

void Tape::Backward(Var root) {
  assert(nodes_[root].value.size() == 1 && "backward root must be scalar");
  grad(root).v[0] = 1.0;
  for (Var i = root; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.requires_grad || !n.backward) continue;
    if (n.grad.empty()) continue;  // not reachable from root
    n.backward(*this, n.grad);
  }
}

namespace {
inline bool Req(Tape& t, Var a) { return t.needs_grad(a); }
}  // namespace

Var Add(Tape& t, Var a, Var b) {
  const Tensor& x = t.val(a);
  const Tensor& y = t.val(b);
  assert(x.same_shape(y));
  Tensor out(x.rows, x.cols);
  for (std::size_t i = 0; i < x.size(); ++i) out.v[i] = x.v[i] + y.v[i];
  return t.Emit(std::move(out), Req(t, a) || Req(t, b),
                [a, b](Tape& tp, const Tensor& g) {
                  if (tp.needs_grad(a)) {
                    Tensor& ga = tp.grad(a);
                    for (std::size_t i = 0; i < g.size(); ++i) ga.v[i] += g.v[i];
                  }
                  if (tp.needs_grad(b)) {
                    Tensor& gb = tp.grad(b);
                    for (std::size_t i = 0; i < g.size(); ++i) gb.v[i] += g.v[i];
                  }
                });
}

Var Sub(Tape& t, Var a, Var b) {
  const Tensor& x = t.val(a);
  const Tensor& y = t.val(b);
  assert(x.same_shape(y));
  Tensor out(x.rows, x.cols);
  for (std::size_t i = 0; i < x.size(); ++i) out.v[i] = x.v[i] - y.v[i];
  return t.Emit(std::move(out), Req(t, a) || Req(t, b),
                [a, b](Tape& tp, const Tensor& g) {
                  if (tp.needs_grad(a)) {
                    Tensor& ga = tp.grad(a);
                    for (std::size_t i = 0; i < g.size(); ++i) ga.v[i] += g.v[i];
                  }
                  if (tp.needs_grad(b)) {
                    Tensor& gb = tp.grad(b);
                    for (std::size_t i = 0; i < g.size(); ++i) gb.v[i] -= g.v[i];
                  }
                });
}

Var Mul(Tape& t, Var a, Var b) {
  const Tensor& x = t.val(a);
  const Tensor& y = t.val(b);
  assert(x.same_shape(y));
  Tensor out(x.rows, x.cols);
  for (std::size_t i = 0; i < x.size(); ++i) out.v[i] = x.v[i] * y.v[i];
  return t.Emit(std::move(out), Req(t, a) || Req(t, b),
                [a, b](Tape& tp, const Tensor& g) {
                  const Tensor& x2 = tp.val(a);
                  const Tensor& y2 = tp.val(b);
                  if (tp.needs_grad(a)) {
                    Tensor& ga = tp.grad(a);
                    for (std::size_t i = 0; i < g.size(); ++i)
                      ga.v[i] += g.v[i] * y2.v[i];
                  }
                  if (tp.needs_grad(b)) {
                    Tensor& gb = tp.grad(b);
                    for (std::size_t i = 0; i < g.size(); ++i)
                      gb.v[i] += g.v[i] * x2.v[i];
                  }
                });
}

Var Scale(Tape& t, Var a, double c) {
  const Tensor& x = t.val(a);
  Tensor out(x.rows, x.cols);
  for (std::size_t i = 0; i < x.size(); ++i) out.v[i] = x.v[i] * c;
  return t.Emit(std::move(out), Req(t, a), [a, c](Tape& tp, const Tensor& g) {
    Tensor& ga = tp.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga.v[i] += g.v[i] * c;
  });
}

Var AddConst(Tape& t, Var a, double c) {
  const Tensor& x = t.val(a);
  Tensor out(x.rows, x.cols);
  for (std::size_t i = 0; i < x.size(); ++i) out.v[i] = x.v[i] + c;
  return t.Emit(std::move(out), Req(t, a), [a](Tape& tp, const Tensor& g) {
    Tensor& ga = tp.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga.v[i] += g.v[i];
  });
}

Var AddBias(Tape& t, Var x, Var bias) {
  const Tensor& xv = t.val(x);
  const Tensor& bv = t.val(bias);
  assert(bv.rows == 1 && bv.cols == xv.cols);
  Tensor out(xv.rows, xv.cols);
  for (int r = 0; r < xv.rows; ++r)
    for (int c = 0; c < xv.cols; ++c) out.at(r, c) = xv.at(r, c) + bv.at(0, c);
  return t.Emit(std::move(out), Req(t, x) || Req(t, bias),
                [x, bias](Tape& tp, const Tensor& g) {
                  if (tp.needs_grad(x)) {
                    Tensor& gx = tp.grad(x);
                    for (std::size_t i = 0; i < g.size(); ++i)
                      gx.v[i] += g.v[i];
                  }
                  if (tp.needs_grad(bias)) {
                    Tensor& gb = tp.grad(bias);
                    for (int r = 0; r < g.rows; ++r)
                      for (int c = 0; c < g.cols; ++c)
                        gb.at(0, c) += g.at(r, c);
                  }
                });
}

Var Square(Tape& t, Var a) {
  const Tensor& x = t.val(a);
  Tensor out(x.rows, x.cols);
  for (std::size_t i = 0; i < x.size(); ++i) out.v[i] = x.v[i] * x.v[i];
  return t.Emit(std::move(out), Req(t, a), [a](Tape& tp, const Tensor& g) {
    const Tensor& x2 = tp.val(a);
    Tensor& ga = tp.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i)
      ga.v[i] += 2.0 * x2.v[i] * g.v[i];
  });
}

Var Sum(Tape& t, Var a) {
  const Tensor& x = t.val(a);
  double s = 0.0;
  for (double e : x.v) s += e;
  Tensor out(1, 1);
  out.v[0] = s;
  return t.Emit(std::move(out), Req(t, a), [a](Tape& tp, const Tensor& g) {
    Tensor& ga = tp.grad(a);
    const double gv = g.v[0];
    for (std::size_t i = 0; i < ga.size(); ++i) ga.v[i] += gv;
  });
}

Var Mean(Tape& t, Var a) {
  const Tensor& x = t.val(a);
  const double inv = 1.0 / static_cast<double>(x.size());
  double s = 0.0;
  for (double e : x.v) s += e;
  Tensor out(1, 1);
  out.v[0] = s * inv;
  return t.Emit(std::move(out), Req(t, a), [a, inv](Tape& tp, const Tensor& g) {
    Tensor& ga = tp.grad(a);
    const double gv = g.v[0] * inv;
    for (std::size_t i = 0; i < ga.size(); ++i) ga.v[i] += gv;
  });
}

Var Ln(Tape& t, Var a) {
  const Tensor& x = t.val(a);
  Tensor out(x.rows, x.cols);
  for (std::size_t i = 0; i < x.size(); ++i) out.v[i] = std::log(x.v[i]);
  return t.Emit(std::move(out), Req(t, a), [a](Tape& tp, const Tensor& g) {
    const Tensor& x2 = tp.val(a);
    Tensor& ga = tp.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga.v[i] += g.v[i] / x2.v[i];
  });
}

Var LogFloored(Tape& t, Var a, double floor) {
  const Tensor& x = t.val(a);
  Tensor out(x.rows, x.cols);
  for (std::size_t i = 0; i < x.size(); ++i)
    out.v[i] = std::log(x.v[i] > floor ? x.v[i] : floor);
  return t.Emit(std::move(out), Req(t, a),
                [a, floor](Tape& tp, const Tensor& g) {
                  const Tensor& x2 = tp.val(a);
                  Tensor& ga = tp.grad(a);
                  for (std::size_t i = 0; i < g.size(); ++i)
                    if (x2.v[i] > floor) ga.v[i] += g.v[i] / x2.v[i];
                });
}

Var Tanh(Tape& t, Var a) {
  const Tensor& x = t.val(a);
  Tensor out(x.rows, x.cols);
  kernels::MapTanh(x.data(), out.data(), x.size());
  return t.Emit(std::move(out), Req(t, a), [a](Tape& tp, const Tensor& g) {
    Tensor& ga = tp.grad(a);
    const Tensor& x2 = tp.val(a);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double y = std::tanh(x2.v[i]);
      ga.v[i] += g.v[i] * (1.0 - y * y);
    }
  });
}

Var Sigmoid(Tape& t, Var a) {
  const Tensor& x = t.val(a);
  Tensor out(x.rows, x.cols);
  kernels::MapSigmoid(x.data(), out.data(), x.size());
  return t.Emit(std::move(out), Req(t, a), [a](Tape& tp, const Tensor& g) {
    const Tensor& x2 = tp.val(a);
    Tensor& ga = tp.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double y = 1.0 / (1.0 + std::exp(-x2.v[i]));
      ga.v[i] += g.v[i] * y * (1.0 - y);
    }
  });
}

Var Relu(Tape& t, Var a) {
  const Tensor& x = t.val(a);
  Tensor out(x.rows, x.cols);
  for (std::size_t i = 0; i < x.size(); ++i)
    out.v[i] = x.v[i] > 0.0 ? x.v[i] : 0.0;
  return t.Emit(std::move(out), Req(t, a), [a](Tape& tp, const Tensor& g) {
    const Tensor& x2 = tp.val(a);
    Tensor& ga = tp.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (x2.v[i] > 0.0) ga.v[i] += g.v[i];
  });
}

Var PRelu(Tape& t, Var x, Var alpha) {
  const Tensor& xv = t.val(x);
  const double av = t.val(alpha).v[0];
  Tensor out(xv.rows, xv.cols);
  for (std::size_t i = 0; i < xv.size(); ++i)
    out.v[i] = xv.v[i] >= 0.0 ? xv.v[i] : av * xv.v[i];
  return t.Emit(std::move(out), Req(t, x) || Req(t, alpha),
                [x, alpha](Tape& tp, const Tensor& g) {
                  const Tensor& x2 = tp.val(x);
                  const double a2 = tp.val(alpha).v[0];
                  if (tp.needs_grad(x)) {
                    Tensor& gx = tp.grad(x);
                    for (std::size_t i = 0; i < g.size(); ++i)
                      gx.v[i] += g.v[i] * (x2.v[i] >= 0.0 ? 1.0 : a2);
                  }
                  if (tp.needs_grad(alpha)) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < g.size(); ++i)
                      if (x2.v[i] < 0.0) acc += g.v[i] * x2.v[i];
                    tp.grad(alpha).v[0] += acc;
                  }
                });
}

Var MatMul(Tape& t, Var a, Var b) {
  const Tensor& x = t.val(a);
  const Tensor& y = t.val(b);
  assert(x.cols == y.rows);
  Tensor out(x.rows, y.cols);
  kernels::MatMulNN(x.data(), y.data(), out.data(), x.rows, x.cols, y.cols,
                    false);
  return t.Emit(std::move(out), Req(t, a) || Req(t, b),
                [a, b](Tape& tp, const Tensor& g) {
                  const Tensor& x2 = tp.val(a);
                  const Tensor& y2 = tp.val(b);
                  if (tp.needs_grad(a)) {
                    kernels::MatMulNT(g.data(), y2.data(), tp.grad(a).data(),
                                      g.rows, g.cols, y2.rows, true);
                  }
                  if (tp.needs_grad(b)) {
                    kernels::MatMulTN(x2.data(), g.data(), tp.grad(b).data(),
                                      x2.cols, x2.rows, g.cols, true);
                  }
                });
}

Var MatMulNT(Tape& t, Var a, Var b) {
  const Tensor& x = t.val(a);
  const Tensor& y = t.val(b);
  assert(x.cols == y.cols);
  Tensor out(x.rows, y.rows);
  kernels::MatMulNT(x.data(), y.data(), out.data(), x.rows, x.cols, y.rows,
                    false);
  return t.Emit(std::move(out), Req(t, a) || Req(t, b),
                [a, b](Tape& tp, const Tensor& g) {
                  const Tensor& x2 = tp.val(a);
                  const Tensor& y2 = tp.val(b);
                  if (tp.needs_grad(a)) {
                    // dA = dC * B
                    kernels::MatMulNN(g.data(), y2.data(), tp.grad(a).data(),
                                      g.rows, g.cols, y2.cols, true);
                  }
                  if (tp.needs_grad(b)) {
                    // dB = dC^T * A
                    kernels::MatMulTN(g.data(), x2.data(), tp.grad(b).data(),
                                      g.cols, g.rows, x2.cols, true);
                  }
                });
}

Var UnfoldRows(Tape& t, Var x, int win, int hop) {
  const Tensor& xv = t.val(x);
  assert(xv.rows == 1);
  Tensor out;
  kernels::Unfold(xv.data(), xv.cols, win, hop, &out);
  return t.Emit(std::move(out), Req(t, x),
                [x, hop](Tape& tp, const Tensor& g) {
                  Tensor& gx = tp.grad(x);
                  kernels::FoldAdd(g, hop, gx.cols, gx.data());
                });
}

Var OverlapAdd(Tape& t, Var frames, int hop, int out_len) {
  const Tensor& fv = t.val(frames);
  Tensor out(1, out_len);
  kernels::FoldAdd(fv, hop, out_len, out.data());
  return t.Emit(std::move(out), Req(t, frames),
                [frames, hop, out_len](Tape& tp, const Tensor& g) {
                  Tensor& gf = tp.grad(frames);
                  const int win = gf.cols;
                  for (int f = 0; f < gf.rows; ++f) {
                    const int base = f * hop;
                    for (int w = 0; w < win && base + w < out_len; ++w)
                      gf.at(f, w) += g.v[base + w];
                  }
                });
}

Var PadCols(Tape& t, Var x, int left, int right) {
  const Tensor& xv = t.val(x);
  Tensor out(xv.rows, left + xv.cols + right);
  for (int r = 0; r < xv.rows; ++r)
    std::memcpy(out.data() + static_cast<std::size_t>(r) * out.cols + left,
                xv.data() + static_cast<std::size_t>(r) * xv.cols,
                sizeof(double) * xv.cols);
  return t.Emit(std::move(out), Req(t, x),
                [x, left](Tape& tp, const Tensor& g) {
                  Tensor& gx = tp.grad(x);
                  for (int r = 0; r < gx.rows; ++r)
                    for (int c = 0; c < gx.cols; ++c)
                      gx.at(r, c) += g.at(r, c + left);
                });
}

Var SliceCols(Tape& t, Var x, int start, int len) {
  const Tensor& xv = t.val(x);
  assert(start >= 0 && start + len <= xv.cols);
  Tensor out(xv.rows, len);
  for (int r = 0; r < xv.rows; ++r)
    std::memcpy(out.data() + static_cast<std::size_t>(r) * len,
                xv.data() + static_cast<std::size_t>(r) * xv.cols + start,
                sizeof(double) * len);
  return t.Emit(std::move(out), Req(t, x),
                [x, start](Tape& tp, const Tensor& g) {
                  Tensor& gx = tp.grad(x);
                  for (int r = 0; r < g.rows; ++r)
                    for (int c = 0; c < g.cols; ++c)
                      gx.at(r, c + start) += g.at(r, c);
                });
}

Var GlobalLayerNorm(Tape& t, Var x, Var gamma, Var beta, double eps) {
  const Tensor& xv = t.val(x);
  const Tensor& gv = t.val(gamma);
  const Tensor& bv = t.val(beta);
  assert(gv.rows == 1 && gv.cols == xv.cols && bv.cols == xv.cols);
  const double n = static_cast<double>(xv.size());
  double mu = 0.0;
  for (double e : xv.v) mu += e;
  mu /= n;
  double var = 0.0;
  for (double e : xv.v) var += (e - mu) * (e - mu);
  var /= n;
  const double inv = 1.0 / std::sqrt(var + eps);
  Tensor xhat(xv.rows, xv.cols);
  Tensor out(xv.rows, xv.cols);
  for (int r = 0; r < xv.rows; ++r)
    for (int c = 0; c < xv.cols; ++c) {
      const double xh = (xv.at(r, c) - mu) * inv;
      xhat.at(r, c) = xh;
      out.at(r, c) = xh * gv.at(0, c) + bv.at(0, c);
    }
  // xhat and inv are captured by value for the backward pass.
  return t.Emit(
      std::move(out), Req(t, x) || Req(t, gamma) || Req(t, beta),
      [x, gamma, beta, xhat, inv](Tape& tp, const Tensor& g) {
        const Tensor& gm = tp.val(gamma);
        const double n = static_cast<double>(xhat.size());
        if (tp.needs_grad(beta)) {
          Tensor& gb = tp.grad(beta);
          for (int r = 0; r < g.rows; ++r)
            for (int c = 0; c < g.cols; ++c) gb.at(0, c) += g.at(r, c);
        }
        if (tp.needs_grad(gamma)) {
          Tensor& gg = tp.grad(gamma);
          for (int r = 0; r < g.rows; ++r)
            for (int c = 0; c < g.cols; ++c)
              gg.at(0, c) += g.at(r, c) * xhat.at(r, c);
        }
        if (tp.needs_grad(x)) {
          double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
          for (int r = 0; r < g.rows; ++r)
            for (int c = 0; c < g.cols; ++c) {
              const double dxh = g.at(r, c) * gm.at(0, c);
              sum_dxhat += dxh;
              sum_dxhat_xhat += dxh * xhat.at(r, c);
            }
          const double m1 = sum_dxhat / n;
          const double m2 = sum_dxhat_xhat / n;
          Tensor& gx = tp.grad(x);
          for (int r = 0; r < g.rows; ++r)
            for (int c = 0; c < g.cols; ++c) {
              const double dxh = g.at(r, c) * gm.at(0, c);
              gx.at(r, c) += inv * (dxh - m1 - xhat.at(r, c) * m2);
            }
        }
      });
}

Var DepthwiseConv(Tape& t, Var x, Var w, int dilation) {
  const Tensor& xv = t.val(x);
  const Tensor& wv = t.val(w);
  assert(wv.rows == xv.cols);
  Tensor out;
  kernels::DepthwiseConv(xv, wv, dilation, &out);
  return t.Emit(std::move(out), Req(t, x) || Req(t, w),
                [x, w, dilation](Tape& tp, const Tensor& g) {
                  const Tensor& xv2 = tp.val(x);
                  const Tensor& wv2 = tp.val(w);
                  Tensor* dx = tp.needs_grad(x) ? &tp.grad(x) : nullptr;
                  Tensor* dw = tp.needs_grad(w) ? &tp.grad(w) : nullptr;
                  kernels::DepthwiseConvBackward(xv2, wv2, dilation, g, dx, dw);
                });
}

Var SoftmaxRows(Tape& t, Var a) {
  const Tensor& x = t.val(a);
  Tensor out(x.rows, x.cols);
  for (int r = 0; r < x.rows; ++r) {
    double m = x.at(r, 0);
    for (int c = 1; c < x.cols; ++c) m = std::max(m, x.at(r, c));
    double z = 0.0;
    for (int c = 0; c < x.cols; ++c) {
      const double e = std::exp(x.at(r, c) - m);
      out.at(r, c) = e;
      z += e;
    }
    for (int c = 0; c < x.cols; ++c) out.at(r, c) /= z;
  }
  Tensor y = out;  // captured for backward
  return t.Emit(std::move(out), Req(t, a), [a, y](Tape& tp, const Tensor& g) {
    Tensor& ga = tp.grad(a);
    for (int r = 0; r < g.rows; ++r) {
      double dot = 0.0;
      for (int c = 0; c < g.cols; ++c) dot += g.at(r, c) * y.at(r, c);
      for (int c = 0; c < g.cols; ++c)
        ga.at(r, c) += y.at(r, c) * (g.at(r, c) - dot);
    }
  });
}

Var LogSoftmaxRows(Tape& t, Var a) {
  const Tensor& x = t.val(a);
  Tensor out(x.rows, x.cols);
  for (int r = 0; r < x.rows; ++r) {
    double m = x.at(r, 0);
    for (int c = 1; c < x.cols; ++c) m = std::max(m, x.at(r, c));
    double z = 0.0;
    for (int c = 0; c < x.cols; ++c) z += std::exp(x.at(r, c) - m);
    const double lse = m + std::log(z);
    for (int c = 0; c < x.cols; ++c) out.at(r, c) = x.at(r, c) - lse;
  }
  Tensor y = out;
  return t.Emit(std::move(out), Req(t, a), [a, y](Tape& tp, const Tensor& g) {
    Tensor& ga = tp.grad(a);
    for (int r = 0; r < g.rows; ++r) {
      double gsum = 0.0;
      for (int c = 0; c < g.cols; ++c) gsum += g.at(r, c);
      for (int c = 0; c < g.cols; ++c)
        ga.at(r, c) += g.at(r, c) - std::exp(y.at(r, c)) * gsum;
    }
  });
}

Var NllRows(Tape& t, Var logp, const std::vector<int>& targets) {
  const Tensor& lp = t.val(logp);
  assert(static_cast<int>(targets.size()) == lp.rows);
  const double inv = 1.0 / static_cast<double>(lp.rows);
  double loss = 0.0;
  for (int r = 0; r < lp.rows; ++r) loss -= lp.at(r, targets[r]);
  Tensor out(1, 1);
  out.v[0] = loss * inv;
  std::vector<int> tv = targets;
  return t.Emit(std::move(out), Req(t, logp),
                [logp, tv, inv](Tape& tp, const Tensor& g) {
                  Tensor& gl = tp.grad(logp);
                  const double gv = g.v[0] * inv;
                  for (int r = 0; r < gl.rows; ++r)
                    gl.at(r, tv[r]) -= gv;
                });
}

// CTC via the standard log-space forward-backward recursion over the
// blank-augmented label sequence. The gradient w.r.t. the logits is
// softmax(logits) minus the state-occupancy posterior.
Var CtcLoss(Tape& t, Var logits, const std::vector<int>& targets, int blank) {
  const Tensor& lg = t.val(logits);
  const int frames = lg.rows;
  const int vocab = lg.cols;
  const int u = static_cast<int>(targets.size());
  if (u == 0) throw VocabularyError("CTC target sequence is empty");
  for (int tok : targets)
    if (tok < 0 || tok >= vocab || tok == blank)
      throw VocabularyError("CTC target token out of vocabulary");

  // Minimum frames: each label plus a mandatory blank between repeats.
  int min_frames = u;
  for (int i = 1; i < u; ++i)
    if (targets[i] == targets[i - 1]) ++min_frames;
  if (frames < min_frames)
    throw VocabularyError("CTC target longer than the available frames");

  const int states = 2 * u + 1;
  auto label_of = [&](int s) -> int {
    return (s % 2 == 0) ? blank : targets[s / 2];
  };

  // log-softmax of the logits (plain math; the op owns its own chain rule).
  Tensor lp(frames, vocab);
  Tensor sm(frames, vocab);
  for (int f = 0; f < frames; ++f) {
    double m = lg.at(f, 0);
    for (int c = 1; c < vocab; ++c) m = std::max(m, lg.at(f, c));
    double z = 0.0;
    for (int c = 0; c < vocab; ++c) z += std::exp(lg.at(f, c) - m);
    const double lse = m + std::log(z);
    for (int c = 0; c < vocab; ++c) {
      lp.at(f, c) = lg.at(f, c) - lse;
      sm.at(f, c) = std::exp(lp.at(f, c));
    }
  }

  std::vector<double> alpha(static_cast<std::size_t>(frames) * states,
                            kLogZero);
  std::vector<double> beta(static_cast<std::size_t>(frames) * states,
                           kLogZero);
  auto A = [&](int f, int s) -> double& { return alpha[f * states + s]; };
  auto B = [&](int f, int s) -> double& { return beta[f * states + s]; };

  A(0, 0) = lp.at(0, blank);
  if (states > 1) A(0, 1) = lp.at(0, label_of(1));
  for (int f = 1; f < frames; ++f) {
    for (int s = 0; s < states; ++s) {
      double best = A(f - 1, s);
      if (s >= 1) best = LogSumExp2(best, A(f - 1, s - 1));
      if (s >= 2 && label_of(s) != blank && label_of(s) != label_of(s - 2))
        best = LogSumExp2(best, A(f - 1, s - 2));
      if (best > kLogZero) A(f, s) = best + lp.at(f, label_of(s));
    }
  }

  B(frames - 1, states - 1) = 0.0;
  if (states > 1) B(frames - 1, states - 2) = 0.0;
  for (int f = frames - 2; f >= 0; --f) {
    for (int s = 0; s < states; ++s) {
      double acc = kLogZero;
      // stay
      if (B(f + 1, s) > kLogZero)
        acc = LogSumExp2(acc, B(f + 1, s) + lp.at(f + 1, label_of(s)));
      // advance
      if (s + 1 < states && B(f + 1, s + 1) > kLogZero)
        acc = LogSumExp2(acc, B(f + 1, s + 1) + lp.at(f + 1, label_of(s + 1)));
      // skip over blank
      if (s + 2 < states && label_of(s + 2) != blank &&
          label_of(s + 2) != label_of(s) && B(f + 1, s + 2) > kLogZero)
        acc = LogSumExp2(acc, B(f + 1, s + 2) + lp.at(f + 1, label_of(s + 2)));
      B(f, s) = acc;
    }
  }

  const double log_p = LogSumExp2(A(frames - 1, states - 1),
                                  A(frames - 1, states - 2));
  if (!(log_p > kLogZero))
    throw VocabularyError("CTC alignment has zero probability");

  // d(-log p)/d(logit[f,k]) = softmax[f,k] - gamma[f,k]
  Tensor dlogits(frames, vocab);
  for (int f = 0; f < frames; ++f) {
    std::vector<double> gam(vocab, kLogZero);
    for (int s = 0; s < states; ++s) {
      const double occ = A(f, s) + B(f, s);
      if (occ <= kLogZero) continue;
      const int k = label_of(s);
      gam[k] = LogSumExp2(gam[k], occ);
    }
    for (int k = 0; k < vocab; ++k) {
      const double post = gam[k] > kLogZero ? std::exp(gam[k] - log_p) : 0.0;
      dlogits.at(f, k) = sm.at(f, k) - post;
    }
  }

  Tensor out(1, 1);
  out.v[0] = -log_p;
  return t.Emit(std::move(out), Req(t, logits),
                [logits, dlogits](Tape& tp, const Tensor& g) {
                  Tensor& gl = tp.grad(logits);
                  const double gv = g.v[0];
                  for (std::size_t i = 0; i < gl.size(); ++i)
                    gl.v[i] += gv * dlogits.v[i];
                });
}

}  // namespace ad
}  // namespace sefx
