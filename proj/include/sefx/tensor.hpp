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

#ifndef SEFX_TENSOR_HPP_
#define SEFX_TENSOR_HPP_

#include <cassert>
#include <cstdint>
#include <vector>

namespace sefx {

// Dense row-major 2-D matrix of doubles. Row vectors (rows == 1) double as
// 1-D signals. All numeric state in the project lives in these.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, 0.0) {}
  Tensor(int r, int c, std::vector<double> data)
      : rows(r), cols(c), v(std::move(data)) {
    assert(static_cast<std::size_t>(rows) * cols == v.size());
  }

  static Tensor Zeros(int r, int c) { return Tensor(r, c); }
  static Tensor RowVector(std::vector<double> data) {
    int n = static_cast<int>(data.size());
    return Tensor(1, n, std::move(data));
  }

  std::size_t size() const { return v.size(); }
  bool empty() const { return v.empty(); }

  double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const {
    return v[static_cast<std::size_t>(r) * cols + c];
  }

  double* data() { return v.data(); }
  const double* data() const { return v.data(); }

  bool same_shape(const Tensor& o) const {
    return rows == o.rows && cols == o.cols;
  }

  void fill(double x) { std::fill(v.begin(), v.end(), x); }
};

}  // namespace sefx

#endif  // SEFX_TENSOR_HPP_
