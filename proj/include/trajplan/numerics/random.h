// Copyright 2026 The Trajplan Authors
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

#ifndef TRAJPLAN_NUMERICS_RANDOM_H_
#define TRAJPLAN_NUMERICS_RANDOM_H_

#include <cstdint>

namespace trajplan {

// splitmix64 finalizer
inline uint64_t Mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Hashes an ordered list of counters into one 64-bit key.
inline uint64_t HashCounters(uint64_t a, uint64_t b = 0, uint64_t c = 0,
                             uint64_t d = 0) {
  uint64_t h = Mix64(a);
  h = Mix64(h ^ b);
  h = Mix64(h ^ c);
  return Mix64(h ^ d);
}

// Uniform double in [0, 1) built from the top 53 bits.
inline double BitsToUnit(uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Stateless uniform draw keyed by counters.
inline double CounterUniform(uint64_t a, uint64_t b = 0, uint64_t c = 0,
                             uint64_t d = 0) {
  return BitsToUnit(HashCounters(a, b, c, d));
}

// Small sequential generator (xoshiro256**). Unlike the standard library
// distributions, every draw here is bit-identical across platforms.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  uint64_t NextU64();
  double Uniform();                     // [0, 1)
  double Uniform(double lo, double hi);  // [lo, hi)
  int64_t UniformInt(int64_t n);        // [0, n)
  double Normal();                      // standard normal, Box-Muller
  bool Bernoulli(double p) { return Uniform() < p; }

 private:
  uint64_t s_[4];
};

}  // namespace trajplan

#endif  // TRAJPLAN_NUMERICS_RANDOM_H_
