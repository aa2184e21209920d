#include "jcas/rng.hpp"

namespace jcas {

std::vector<std::complex<double>> sample_cnormal(RngStream& rng, std::complex<double> mean,
                                                 double variance, std::size_t n) {
  if (variance < 0.0) throw std::invalid_argument("sample_cnormal: negative variance");
  std::vector<std::complex<double>> out(n);
  for (auto& z : out) z = rng.cnormal(mean, variance);
  return out;
}

std::uint64_t substream_id(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  // order-sensitive combine; each component passes through the murmur finalizer
  auto mix = [](std::uint64_t z) {
    z ^= z >> 33;
    z *= 0xFF51AFD7ED558CCDULL;
    z ^= z >> 33;
    z *= 0xC4CEB9FE1A85EC53ULL;
    z ^= z >> 33;
    return z;
  };
  std::uint64_t h = 0x2545F4914F6CDD1DULL;
  h = mix(h ^ a) * 0x9E3779B97F4A7C15ULL;
  h = mix(h ^ b) * 0x9E3779B97F4A7C15ULL;
  h = mix(h ^ c);
  return h;
}

}  // namespace jcas
