#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace jcas {

/// Counter-free splittable random stream: a (seed, stream_id) pair fully
/// determines the sample sequence, so Monte-Carlo scenarios can be generated
/// in any order (or in parallel) and still replay bit-identically.
///
/// The generator is xoshiro256++ with SplitMix64 state expansion; all
/// variate transforms (Box-Muller etc.) are implemented here rather than via
/// std::*_distribution so sequences are identical across standard libraries.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id)
      : seed_(seed), stream_(stream_id) {
    std::uint64_t sm = mix64(seed) + 0x9E3779B97F4A7C15ULL * (mix64(stream_id) | 1ULL);
    for (auto& word : s_) {
      sm += 0x9E3779B97F4A7C15ULL;
      word = mix64(sm);
    }
    // xoshiro must not start from the all-zero state
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 0x1ULL;
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_int: n must be positive");
    // rejection sampling to avoid modulo bias
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal via Box-Muller (pairs cached).
  double normal() {
    if (has_cache_) {
      has_cache_ = false;
      return cache_;
    }
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    cache_ = r * std::sin(a);
    has_cache_ = true;
    return r * std::cos(a);
  }

  /// Circularly-symmetric complex normal CN(mean, variance): real and
  /// imaginary parts are independent N(0, variance/2).
  std::complex<double> cnormal(std::complex<double> mean, double variance) {
    if (variance < 0.0) throw std::invalid_argument("cnormal: negative variance");
    if (variance == 0.0) return mean;
    const double s = std::sqrt(variance / 2.0);
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1)) * s;
    const double a = 2.0 * M_PI * u2;
    return mean + std::complex<double>(r * std::cos(a), r * std::sin(a));
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  // murmur3 finalizer
  static std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 33;
    z *= 0xFF51AFD7ED558CCDULL;
    z ^= z >> 33;
    z *= 0xC4CEB9FE1A85EC53ULL;
    z ^= z >> 33;
    return z;
  }

  std::uint64_t seed_ = 0;
  std::uint64_t stream_ = 0;
  std::array<std::uint64_t, 4> s_{};
  double cache_ = 0.0;
  bool has_cache_ = false;
};

/// n draws from CN(mean, variance).
std::vector<std::complex<double>> sample_cnormal(RngStream& rng, std::complex<double> mean,
                                                 double variance, std::size_t n);

/// Combines identifiers into a sub-stream id (for per-scenario streams).
std::uint64_t substream_id(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0);

}  // namespace jcas
