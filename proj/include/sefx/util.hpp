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

#ifndef SEFX_UTIL_HPP_
#define SEFX_UTIL_HPP_

#include <cstdint>
#include <cstring>
#include <random>
#include <string>
#include <vector>

namespace sefx {

// 64-bit FNV-1a, used for parameter/file checksums in tests and logs.
std::uint64_t Fnv1a64(const void* data, std::size_t n_bytes,
                      std::uint64_t seed = 1469598103934665603ull);

std::uint64_t Fnv1a64(const std::vector<double>& v,
                      std::uint64_t seed = 1469598103934665603ull);

// Checksum of an entire file. Throws IoFailure if unreadable.
std::uint64_t FileChecksum(const std::string& path);

// splitmix64 step; used to derive independent per-item seeds from one seed.
std::uint64_t MixSeed(std::uint64_t seed, std::uint64_t salt);

// Deterministic random stream. Wraps mt19937_64 but maps raw output to
// doubles itself, so sequences do not depend on the standard library's
// distribution implementations.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t NextU64() { return engine_(); }

  // Uniform in [0, 1).
  double NextDouble() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double Uniform(double lo, double hi) { return lo + (hi - lo) * NextDouble(); }

  // Integer in [0, n).
  std::uint64_t NextIndex(std::uint64_t n) { return n ? engine_() % n : 0; }

  // Box-Muller standard normal.
  double Gaussian();

  std::string SaveState() const;
  void LoadState(const std::string& state);

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace sefx

#endif  // SEFX_UTIL_HPP_
