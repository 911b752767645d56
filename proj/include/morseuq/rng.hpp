#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace morseuq {

// splitmix64 finaliser: a cheap, well-mixed hash of one word.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Mixes a list of integers into one 64-bit seed (splitmix64 chain). Used to
// derive independent per-(structure, run) streams from a master seed.
std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts);

// Seeded stream with distribution code written out explicitly, so draws are
// identical across standard libraries (std:: distributions are not).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer on [0, n).
  std::uint64_t below(std::uint64_t n);

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal via Box–Muller; the second variate of each pair is cached.
  double normal();

  // Gamma(shape, rate) via Marsaglia–Tsang; shape < 1 uses the u^(1/shape) boost.
  double gamma(double shape, double rate);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace morseuq
