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

#include "sefx/util.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "sefx/errors.hpp"

namespace sefx {

std::uint64_t Fnv1a64(const void* data, std::size_t n_bytes,
                      std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < n_bytes; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t Fnv1a64(const std::vector<double>& v, std::uint64_t seed) {
  return Fnv1a64(v.data(), v.size() * sizeof(double), seed);
}

std::uint64_t FileChecksum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open file for checksum: " + path);
  std::uint64_t h = 1469598103934665603ull;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    std::streamsize got = in.gcount();
    if (got > 0) h = Fnv1a64(buf, static_cast<std::size_t>(got), h);
  }
  return h;
}

std::uint64_t MixSeed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

double RandomStream::Gaussian() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  // Box-Muller on two uniforms; u clamped away from zero for the log.
  double u = NextDouble();
  double v = NextDouble();
  if (u < 1e-300) u = 1e-300;
  double r = std::sqrt(-2.0 * std::log(u));
  double a = 6.283185307179586476925286766559 * v;
  spare_ = r * std::sin(a);
  have_spare_ = true;
  return r * std::cos(a);
}

std::string RandomStream::SaveState() const {
  std::ostringstream os;
  os << engine_;
  os << " " << (have_spare_ ? 1 : 0) << " ";
  os.precision(17);
  os << spare_;
  return os.str();
}

void RandomStream::LoadState(const std::string& state) {
  std::istringstream is(state);
  is >> engine_;
  int flag = 0;
  is >> flag >> spare_;
  have_spare_ = (flag != 0);
}

}  // namespace sefx
