#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mixmdp {

// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for sub-stream `counter` of `stream` under a master seed. Order of
/// derivation does not matter, so parallel consumers stay reproducible.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                    std::uint64_t counter = 0) {
  return mix64(mix64(master ^ mix64(stream + 0x632be59bd9b4e019ULL)) + counter);
}

namespace stream {
constexpr std::uint64_t trajectory = 1;
constexpr std::uint64_t split = 2;
constexpr std::uint64_t mixture = 3;
constexpr std::uint64_t kmeans = 4;
constexpr std::uint64_t em_restart = 5;
constexpr std::uint64_t projector = 6;
constexpr std::uint64_t trial = 7;
constexpr std::uint64_t scatter = 8;
}  // namespace stream

/// Thin wrapper over mt19937_64 with portable uniform draws (the standard
/// distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * M_PI * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * M_PI * u2);
  }

  double exponential() {
    double u;
    do {
      u = uniform();
    } while (u <= 0.0);
    return -std::log(u);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace mixmdp
