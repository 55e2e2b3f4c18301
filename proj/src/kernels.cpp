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

#include "sefx/kernels.hpp"

#include <atomic>
#include <cmath>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "sefx/errors.hpp"

namespace sefx {
namespace kernels {

namespace {
std::atomic<int> g_workers{1};

inline bool UseParallel() {
#ifdef _OPENMP
  return g_workers.load(std::memory_order_relaxed) > 1;
#else
  return false;
#endif
}
}  // namespace

void SetWorkers(int n) {
  if (n < 1) n = 1;
  g_workers.store(n, std::memory_order_relaxed);
#ifdef _OPENMP
  omp_set_num_threads(n);
#endif
}

int Workers() { return g_workers.load(std::memory_order_relaxed); }

// Row i of C only depends on row i of A (or column i of A^T), so all three
// products parallelize over output rows. Per element the k-summation order
// is ascending in every variant, serial and parallel alike.

void MatMulNNSerial(const double* a, const double* b, double* c, int m, int k,
                    int n, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    double* ci = c + static_cast<std::size_t>(i) * n;
    if (!accumulate) std::memset(ci, 0, sizeof(double) * n);
    const double* ai = a + static_cast<std::size_t>(i) * k;
    for (int kk = 0; kk < k; ++kk) {
      const double av = ai[kk];
      if (av == 0.0) continue;
      const double* bk = b + static_cast<std::size_t>(kk) * n;
      for (int j = 0; j < n; ++j) ci[j] += av * bk[j];
    }
  }
}

void MatMulNN(const double* a, const double* b, double* c, int m, int k, int n,
              bool accumulate) {
  if (!UseParallel() || m < 2) {
    MatMulNNSerial(a, b, c, m, k, n, accumulate);
    return;
  }
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    MatMulNNSerial(a + static_cast<std::size_t>(i) * k, b,
                   c + static_cast<std::size_t>(i) * n, 1, k, n, accumulate);
  }
#endif
}

void MatMulNTSerial(const double* a, const double* b, double* c, int m, int k,
                    int n, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    const double* ai = a + static_cast<std::size_t>(i) * k;
    double* ci = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* bj = b + static_cast<std::size_t>(j) * k;
      double s = 0.0;
      for (int kk = 0; kk < k; ++kk) s += ai[kk] * bj[kk];
      ci[j] = accumulate ? ci[j] + s : s;
    }
  }
}

void MatMulNT(const double* a, const double* b, double* c, int m, int k, int n,
              bool accumulate) {
  if (!UseParallel() || m < 2) {
    MatMulNTSerial(a, b, c, m, k, n, accumulate);
    return;
  }
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    MatMulNTSerial(a + static_cast<std::size_t>(i) * k, b,
                   c + static_cast<std::size_t>(i) * n, 1, k, n, accumulate);
  }
#endif
}

void MatMulTNSerial(const double* a, const double* b, double* c, int m, int k,
                    int n, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    double* ci = c + static_cast<std::size_t>(i) * n;
    if (!accumulate) std::memset(ci, 0, sizeof(double) * n);
    for (int kk = 0; kk < k; ++kk) {
      const double av = a[static_cast<std::size_t>(kk) * m + i];
      if (av == 0.0) continue;
      const double* bk = b + static_cast<std::size_t>(kk) * n;
      for (int j = 0; j < n; ++j) ci[j] += av * bk[j];
    }
  }
}

void MatMulTN(const double* a, const double* b, double* c, int m, int k, int n,
              bool accumulate) {
  if (!UseParallel() || m < 2) {
    MatMulTNSerial(a, b, c, m, k, n, accumulate);
    return;
  }
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    double* ci = c + static_cast<std::size_t>(i) * n;
    if (!accumulate) std::memset(ci, 0, sizeof(double) * n);
    for (int kk = 0; kk < k; ++kk) {
      const double av = a[static_cast<std::size_t>(kk) * m + i];
      if (av == 0.0) continue;
      const double* bk = b + static_cast<std::size_t>(kk) * n;
      for (int j = 0; j < n; ++j) ci[j] += av * bk[j];
    }
  }
#endif
}

void DepthwiseConvSerial(const Tensor& x, const Tensor& w, int dilation,
                         Tensor* out) {
  const int frames = x.rows, channels = x.cols, taps = w.cols;
  const int pad = dilation * (taps - 1) / 2;
  out->rows = frames;
  out->cols = channels;
  out->v.assign(static_cast<std::size_t>(frames) * channels, 0.0);
  for (int f = 0; f < frames; ++f) {
    double* of = out->data() + static_cast<std::size_t>(f) * channels;
    for (int p = 0; p < taps; ++p) {
      const int src = f + dilation * p - pad;
      if (src < 0 || src >= frames) continue;
      const double* xs = x.data() + static_cast<std::size_t>(src) * channels;
      for (int c = 0; c < channels; ++c) of[c] += xs[c] * w.at(c, p);
    }
  }
}

void DepthwiseConv(const Tensor& x, const Tensor& w, int dilation,
                   Tensor* out) {
  if (!UseParallel() || x.rows < 2) {
    DepthwiseConvSerial(x, w, dilation, out);
    return;
  }
#ifdef _OPENMP
  const int frames = x.rows, channels = x.cols, taps = w.cols;
  const int pad = dilation * (taps - 1) / 2;
  out->rows = frames;
  out->cols = channels;
  out->v.assign(static_cast<std::size_t>(frames) * channels, 0.0);
#pragma omp parallel for schedule(static)
  for (int f = 0; f < frames; ++f) {
    double* of = out->data() + static_cast<std::size_t>(f) * channels;
    for (int p = 0; p < taps; ++p) {
      const int src = f + dilation * p - pad;
      if (src < 0 || src >= frames) continue;
      const double* xs = x.data() + static_cast<std::size_t>(src) * channels;
      for (int c = 0; c < channels; ++c) of[c] += xs[c] * w.at(c, p);
    }
  }
#endif
}

void DepthwiseConvBackward(const Tensor& x, const Tensor& w, int dilation,
                           const Tensor& dout, Tensor* dx, Tensor* dw) {
  const int frames = x.rows, channels = x.cols, taps = w.cols;
  const int pad = dilation * (taps - 1) / 2;
  // Each channel's column is independent, so channels partition the work
  // without write conflicts.
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (UseParallel() && channels > 1)
#endif
  for (int c = 0; c < channels; ++c) {
    for (int f = 0; f < frames; ++f) {
      const double g = dout.at(f, c);
      if (g == 0.0) continue;
      for (int p = 0; p < taps; ++p) {
        const int src = f + dilation * p - pad;
        if (src < 0 || src >= frames) continue;
        if (dx) dx->at(src, c) += g * w.at(c, p);
        if (dw) dw->at(c, p) += g * x.at(src, c);
      }
    }
  }
}

int UnfoldFrames(int t, int win, int hop) {
  if (t < win) throw InputTooShort("signal shorter than analysis window");
  return (t - win) / hop + 1;
}

void Unfold(const double* x, int t, int win, int hop, Tensor* out) {
  const int frames = UnfoldFrames(t, win, hop);
  out->rows = frames;
  out->cols = win;
  out->v.resize(static_cast<std::size_t>(frames) * win);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (UseParallel() && frames > 1)
#endif
  for (int f = 0; f < frames; ++f) {
    std::memcpy(out->data() + static_cast<std::size_t>(f) * win,
                x + static_cast<std::size_t>(f) * hop, sizeof(double) * win);
  }
}

void FoldAddSerial(const Tensor& frames, int hop, int t, double* out) {
  const int win = frames.cols;
  for (int f = 0; f < frames.rows; ++f) {
    const double* fr = frames.data() + static_cast<std::size_t>(f) * frames.cols;
    const int base = f * hop;
    for (int w = 0; w < win && base + w < t; ++w) out[base + w] += fr[w];
  }
}

void FoldAdd(const Tensor& frames, int hop, int t, double* out) {
  if (!UseParallel() || t < 2) {
    FoldAddSerial(frames, hop, t, out);
    return;
  }
#ifdef _OPENMP
  const int win = frames.cols;
#pragma omp parallel for schedule(static)
  for (int s = 0; s < t; ++s) {
    // Frames covering sample s: f*hop <= s < f*hop + win.
    int f_hi = s / hop;
    int f_lo = (s - win) / hop + 1;
    if (s < win) f_lo = 0;
    if (f_hi >= frames.rows) f_hi = frames.rows - 1;
    double acc = out[s];
    for (int f = f_lo; f <= f_hi; ++f) acc += frames.at(f, s - f * hop);
    out[s] = acc;
  }
#endif
}

void MapTanhSerial(const double* in, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::tanh(in[i]);
}

void MapTanh(const double* in, double* out, std::size_t n) {
  if (!UseParallel() || n < 64) {
    MapTanhSerial(in, out, n);
    return;
  }
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i)
    out[i] = std::tanh(in[i]);
#endif
}

void MapSigmoid(const double* in, double* out, std::size_t n) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (UseParallel() && n >= 64)
#endif
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i)
    out[i] = 1.0 / (1.0 + std::exp(-in[i]));
}

}  // namespace kernels
}  // namespace sefx
