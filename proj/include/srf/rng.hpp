// Copyright Contributors to the scaffold-rf Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>

namespace srf {

inline uint64_t fnv1a64(const void* data, size_t n, uint64_t seed = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  uint64_t h = seed;
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline uint64_t hash_combine(uint64_t a, uint64_t b) {
  // splitmix64 finalizer over the xor; enough mixing for stream derivation
  uint64_t x = a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2));
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ull;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebull;
  x ^= x >> 31;
  return x;
}

// PCG32 (Melissa O'Neill). Bit-reproducible across platforms, cheap to fork
// into independent per-pixel streams.
class Pcg32 {
 public:
  Pcg32() : Pcg32(0x853c49e6748fea9bull, 0xda3e39cb94b95bdbull) {}
  explicit Pcg32(uint64_t seed, uint64_t stream = 1) {
    state_ = 0u;
    inc_ = (stream << 1u) | 1u;
    next_u32();
    state_ += seed;
    next_u32();
  }

  uint32_t next_u32() {
    const uint64_t old = state_;
    state_ = old * 6364136223846793005ull + inc_;
    const uint32_t xorshifted = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
    const uint32_t rot = static_cast<uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((~rot + 1u) & 31u));
  }

  uint32_t next_below(uint32_t bound) { return next_u32() % bound; }

  double next_double() {  // uniform in [0, 1)
    return next_u32() * 0x1p-32;
  }

  double normal() {  // Box-Muller, mean 0 std 1
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = next_double();
    const double u2 = next_double();
    if (u1 <= 0.0) u1 = 0x1p-32;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // Independent stream derived from this generator's seed and an id; forking
  // does not advance the parent.
  Pcg32 fork(uint64_t stream_id) const {
    return Pcg32(hash_combine(state_, stream_id), hash_combine(inc_, stream_id) | 1u);
  }

 private:
  uint64_t state_;
  uint64_t inc_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace srf
