// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string_view>

#include <Eigen/Dense>

namespace kunveil {

// Finalizer from the splitmix64 generator. Bijective on 64-bit words, used
// both to whiten seeds and to mix stream components together.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// FNV-1a over bytes. Stable across platforms, used to fold string-valued
// stream labels (e.g. a gap distribution spec) into seed derivation.
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Derives a child seed from a base seed and a list of stream components.
// Distinct component tuples map to distinct streams with overwhelming
// probability; equal tuples map to the same stream by construction.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = splitmix64(base);
  for (std::uint64_t p : parts) h = splitmix64(h ^ p);
  return h;
}

// Deterministic generator. std::mt19937_64 is bit-stable across platforms;
// the distributions here avoid std::uniform_real_distribution and friends,
// whose output is implementation-defined.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : gen_(splitmix64(seed)) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Inverse-CDF draw from the weights w (nonnegative, summing to ~1).
  // The final positive-weight index absorbs any rounding shortfall.
  int categorical(const Eigen::Ref<const Eigen::VectorXd>& w) {
    const double u = uniform();
    double cum = 0.0;
    int last_positive = -1;
    for (int i = 0; i < w.size(); ++i) {
      if (w(i) <= 0.0) continue;
      last_positive = i;
      cum += w(i);
      if (u < cum) return i;
    }
    if (last_positive < 0) throw std::invalid_argument("categorical: all weights are zero");
    return last_positive;
  }

  // Exponential(1) by inversion; u is pulled away from 0 and 1 so the
  // result is strictly positive and finite.
  double exponential() {
    double u;
    do {
      u = uniform();
    } while (u == 0.0);
    return -std::log1p(-u);
  }

private:
  std::mt19937_64 gen_;
};

}  // namespace kunveil
