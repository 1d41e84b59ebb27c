// Copyright 2026 The dpopt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DPOPT_RNG_HPP_
#define DPOPT_RNG_HPP_

#include <cstdint>
#include <initializer_list>
#include <random>
#include <utility>
#include <vector>

namespace dpopt {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seeded random stream with hierarchical substream derivation. Substreams
// are keyed off the stream's own key, never its draw position, so forked
// streams are reproducible regardless of how many draws the parent made.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : key_(seed), gen_(splitmix64(seed)) {}

  std::uint64_t key() const { return key_; }

  RngStream fork(std::initializer_list<std::uint64_t> path) const {
    std::uint64_t k = key_;
    for (std::uint64_t p : path) k = splitmix64(k ^ splitmix64(p));
    return RngStream(k);
  }

  std::uint64_t next_u64() { return gen_(); }

  // Uniform draw on the open interval (0, 1).
  double uniform_open() {
    for (;;) {
      double u = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
      if (u > 0.0) return u;
    }
  }

  bool bernoulli(double p) { return uniform_open() < p; }

  // Uniform integer in [0, n). Rejection sampling avoids modulo bias.
  std::size_t uniform_index(std::size_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit =
        std::uint64_t(-1) - std::uint64_t(-1) % static_cast<std::uint64_t>(n);
    for (;;) {
      std::uint64_t v = gen_();
      if (v < limit) return static_cast<std::size_t>(v % n);
    }
  }

  // Fisher-Yates; std::shuffle output is implementation-defined, this is not.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[uniform_index(i)]);
    }
  }

 private:
  std::uint64_t key_;
  std::mt19937_64 gen_;
};

}  // namespace dpopt

#endif  // DPOPT_RNG_HPP_
