// Copyright 2026 detqe authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string_view>

#include "detqe/common.hpp"

namespace detqe {

// Deterministic RNG with a fully serializable state. std:: distributions are
// implementation-defined, so everything that must reproduce byte-for-byte
// (training, sampling, corpus synthesis) goes through this.
//
// Core generator: xoshiro256**, seeded via splitmix64.
class Rng {
 public:
  explicit Rng(uint64_t seed) { reseed(seed); }

  void reseed(uint64_t seed) {
    uint64_t x = seed;
    for (auto& w : state_) w = splitmix64(x);
    has_gauss_ = false;
    gauss_spare_ = 0.0;
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). Rejection sampling, exact.
  uint64_t below(uint64_t n) {
    if (n == 0) throw state_error("Rng::below(0)");
    const uint64_t threshold = (0 - n) % n;
    for (;;) {
      uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // Standard normal via Box-Muller with a cached spare.
  double gauss() {
    if (has_gauss_) {
      has_gauss_ = false;
      return gauss_spare_;
    }
    double u1 = 0.0;
    while (u1 == 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    gauss_spare_ = r * std::sin(a);
    has_gauss_ = true;
    return r * std::cos(a);
  }

  double uniform_range(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Serialized form: 4 state words + spare-gaussian slot.
  struct State {
    std::array<uint64_t, 4> words;
    bool has_gauss;
    double gauss_spare;
  };
  State save() const { return {state_, has_gauss_, gauss_spare_}; }
  void restore(const State& s) {
    state_ = s.words;
    has_gauss_ = s.has_gauss;
    gauss_spare_ = s.gauss_spare;
  }

  static uint64_t splitmix64(uint64_t& x) {
    uint64_t z = (x += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::array<uint64_t, 4> state_;
  bool has_gauss_ = false;
  double gauss_spare_ = 0.0;
};

// One global seed fans out to per-component seeds by stable hashing of the
// component name, so each pipeline stage has an independent stream.
inline uint64_t derive_seed(uint64_t base, std::string_view component) {
  uint64_t h = fnv1a(component, base ^ 0x9e3779b97f4a7c15ull);
  return Rng::splitmix64(h);
}

inline uint64_t derive_seed(uint64_t base, std::string_view component, uint64_t index) {
  uint64_t h = derive_seed(base, component) ^ (0xd1b54a32d192ed03ull * (index + 1));
  return Rng::splitmix64(h);
}

}  // namespace detqe
