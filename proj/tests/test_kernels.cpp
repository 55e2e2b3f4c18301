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

#include <doctest.h>

#include "sefx/errors.hpp"
#include "test_support.hpp"

using namespace sefx;
using sefx_test::RandomVector;

namespace {

// Naive k-ascending triple loop; the independent oracle for every product
// variant.
Tensor NaiveMatMulNN(const Tensor& a, const Tensor& b) {
  Tensor c(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < b.cols; ++j) {
      double s = 0.0;
      for (int k = 0; k < a.cols; ++k) s += a.at(i, k) * b.at(k, j);
      c.at(i, j) = s;
    }
  return c;
}

Tensor RandomTensor(std::uint64_t seed, int r, int c) {
  return Tensor(r, c, RandomVector(seed, r * c));
}

struct WorkerGuard {
  explicit WorkerGuard(int n) { kernels::SetWorkers(n); }
  ~WorkerGuard() { kernels::SetWorkers(1); }
};

}  // namespace

TEST_CASE("matmul variants match the naive oracle") {
  const Tensor a = RandomTensor(1, 7, 5);
  const Tensor b = RandomTensor(2, 5, 9);
  const Tensor want = NaiveMatMulNN(a, b);

  Tensor c(7, 9);
  kernels::MatMulNNSerial(a.data(), b.data(), c.data(), 7, 5, 9, false);
  for (std::size_t i = 0; i < want.size(); ++i)
    CHECK(c.v[i] == doctest::Approx(want.v[i]).epsilon(1e-12));

  // NT: A * (B^T)^T via an explicitly transposed operand.
  Tensor bt(9, 5);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 9; ++j) bt.at(j, i) = b.at(i, j);
  Tensor c_nt(7, 9);
  kernels::MatMulNTSerial(a.data(), bt.data(), c_nt.data(), 7, 5, 9, false);
  for (std::size_t i = 0; i < want.size(); ++i)
    CHECK(c_nt.v[i] == doctest::Approx(want.v[i]).epsilon(1e-12));

  Tensor at(5, 7);
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 5; ++j) at.at(j, i) = a.at(i, j);
  Tensor c_tn(7, 9);
  kernels::MatMulTNSerial(at.data(), b.data(), c_tn.data(), 7, 5, 9, false);
  for (std::size_t i = 0; i < want.size(); ++i)
    CHECK(c_tn.v[i] == doctest::Approx(want.v[i]).epsilon(1e-12));
}

TEST_CASE("parallel kernels are bit-identical to the serial reference") {
  WorkerGuard guard(4);

  for (auto [m, k, n] : {std::tuple{1, 1, 1}, std::tuple{3, 17, 2},
                         std::tuple{33, 8, 65}, std::tuple{128, 64, 40}}) {
    const Tensor a = RandomTensor(100 + m, m, k);
    const Tensor b = RandomTensor(200 + n, k, n);
    Tensor serial(m, n), parallel(m, n);
    kernels::MatMulNNSerial(a.data(), b.data(), serial.data(), m, k, n, false);
    kernels::MatMulNN(a.data(), b.data(), parallel.data(), m, k, n, false);
    CHECK(serial.v == parallel.v);

    const Tensor bt = RandomTensor(300 + n, n, k);
    Tensor s2(m, n), p2(m, n);
    kernels::MatMulNTSerial(a.data(), bt.data(), s2.data(), m, k, n, false);
    kernels::MatMulNT(a.data(), bt.data(), p2.data(), m, k, n, false);
    CHECK(s2.v == p2.v);

    const Tensor atp = RandomTensor(400 + m, k, m);
    Tensor s3(m, n), p3(m, n);
    kernels::MatMulTNSerial(atp.data(), b.data(), s3.data(), m, k, n, false);
    kernels::MatMulTN(atp.data(), b.data(), p3.data(), m, k, n, false);
    CHECK(s3.v == p3.v);
  }
}

TEST_CASE("depthwise conv matches a direct evaluation and its parallel twin") {
  const int frames = 23, channels = 6, taps = 3, dilation = 4;
  const Tensor x = RandomTensor(11, frames, channels);
  const Tensor w = RandomTensor(12, channels, taps);

  Tensor serial;
  kernels::DepthwiseConvSerial(x, w, dilation, &serial);

  // direct evaluation
  const int pad = dilation * (taps - 1) / 2;
  for (int f = 0; f < frames; ++f)
    for (int c = 0; c < channels; ++c) {
      double want = 0.0;
      for (int p = 0; p < taps; ++p) {
        const int src = f + dilation * p - pad;
        if (src >= 0 && src < frames) want += x.at(src, c) * w.at(c, p);
      }
      CHECK(serial.at(f, c) == doctest::Approx(want).epsilon(1e-13));
    }

  WorkerGuard guard(3);
  Tensor parallel;
  kernels::DepthwiseConv(x, w, dilation, &parallel);
  CHECK(serial.v == parallel.v);
}

TEST_CASE("unfold/fold round trip and parallel equivalence") {
  const int t = 101, win = 12, hop = 5;
  const std::vector<double> x = RandomVector(55, t);

  Tensor frames;
  kernels::Unfold(x.data(), t, win, hop, &frames);
  const int n_frames = kernels::UnfoldFrames(t, win, hop);
  CHECK(frames.rows == n_frames);
  CHECK(frames.cols == win);
  for (int f = 0; f < n_frames; ++f)
    for (int w = 0; w < win; ++w) CHECK(frames.at(f, w) == x[f * hop + w]);

  std::vector<double> serial(t, 0.0), parallel(t, 0.0);
  kernels::FoldAddSerial(frames, hop, t, serial.data());
  {
    WorkerGuard guard(5);
    kernels::FoldAdd(frames, hop, t, parallel.data());
  }
  CHECK(serial == parallel);

  // Each sample accumulates once per covering frame.
  for (int s = 0; s < t; ++s) {
    double want = 0.0;
    for (int f = 0; f < n_frames; ++f) {
      const int off = s - f * hop;
      if (off >= 0 && off < win) want += frames.at(f, off);
    }
    CHECK(serial[s] == doctest::Approx(want).epsilon(1e-13));
  }
}

TEST_CASE("tanh map parallel equivalence") {
  const std::vector<double> x = RandomVector(77, 997, -3.0, 3.0);
  std::vector<double> serial(x.size()), parallel(x.size());
  kernels::MapTanhSerial(x.data(), serial.data(), x.size());
  WorkerGuard guard(4);
  kernels::MapTanh(x.data(), parallel.data(), x.size());
  CHECK(serial == parallel);
}

TEST_CASE("unfold rejects too-short input") {
  CHECK_THROWS_AS(kernels::UnfoldFrames(7, 8, 4), InputTooShort);
}
