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

#ifndef SEFX_TESTS_TEST_SUPPORT_HPP_
#define SEFX_TESTS_TEST_SUPPORT_HPP_

#include <cmath>
#include <functional>
#include <vector>

#include "sefx/util.hpp"
#include "sefx/wave.hpp"

namespace sefx_test {

// Central finite differences, step h, double precision. The oracle against
// which every analytic gradient in the suite is checked.
inline std::vector<double> FiniteDifferenceGrad(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> x, double h = 1e-6) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double fp = f(x);
    x[i] = orig - h;
    const double fm = f(x);
    x[i] = orig;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

// l2-norm relative error between an analytic gradient and its oracle.
inline double RelativeError(const std::vector<double>& got,
                            const std::vector<double>& want) {
  double diff = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    diff += (got[i] - want[i]) * (got[i] - want[i]);
    ref += want[i] * want[i];
  }
  if (ref == 0.0) return std::sqrt(diff);
  return std::sqrt(diff / ref);
}

inline sefx::Waveform RandomWave(std::uint64_t seed, int n, int rate = 16000,
                                 double lo = -0.5, double hi = 0.5) {
  sefx::RandomStream rng(seed);
  sefx::Waveform w;
  w.sample_rate = rate;
  w.samples.resize(n);
  for (double& s : w.samples) s = rng.Uniform(lo, hi);
  return w;
}

inline std::vector<double> RandomVector(std::uint64_t seed, int n,
                                        double lo = -1.0, double hi = 1.0) {
  sefx::RandomStream rng(seed);
  std::vector<double> v(n);
  for (double& s : v) s = rng.Uniform(lo, hi);
  return v;
}

}  // namespace sefx_test

#endif  // SEFX_TESTS_TEST_SUPPORT_HPP_
