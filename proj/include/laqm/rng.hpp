// Copyright 2026 The LAQM Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LAQM_RNG_HPP_
#define LAQM_RNG_HPP_

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace laqm {

// Deterministic random source. All randomness in a run flows from one seed
// through named substreams, so stages can be re-run independently and still
// reproduce bit-identically. std::mt19937_64 output is fully specified by
// the standard; the distributions below are hand-rolled because the standard
// library's are implementation-defined.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  // Derives an independent stream from (seed, name).
  static Rng substream(uint64_t seed, std::string_view name);

  uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [lo, hi] inclusive.
  int64_t uniform_int(int64_t lo, int64_t hi);

  // Standard normal via Box-Muller.
  double normal();

  // Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_int(0, static_cast<int64_t>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Draws k distinct indices from [0, n) uniformly, in draw order.
  std::vector<size_t> sample_without_replacement(size_t n, size_t k);

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// 64-bit FNV-1a over a byte string; used for substream derivation and cheap
// non-cryptographic keys (content hashes use SHA-256, see hash.hpp).
uint64_t fnv1a64(std::string_view bytes);

}  // namespace laqm

#endif  // LAQM_RNG_HPP_
