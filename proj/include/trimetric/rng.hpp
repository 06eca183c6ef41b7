#ifndef TRIMETRIC_RNG_HPP_
#define TRIMETRIC_RNG_HPP_

#include <cstdint>
#include <cmath>
#include <random>

namespace trimetric {

using Rng = std::mt19937_64;

// Uniform double in [0, 1) from the top 53 bits of the generator output.
// std::uniform_real_distribution is implementation-defined, so seeded runs
// would not reproduce across standard libraries; this does.
inline double uniform_double(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_in(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform_double(rng);
}

// Unbiased integer in [0, n), n >= 1, by rejection.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = std::uint64_t(-1) - std::uint64_t(-1) % n;
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return v % n;
}

// Signed integer offset in [-radius, radius].
inline int uniform_offset(Rng& rng, int radius) {
  if (radius == 0) return 0;
  return static_cast<int>(uniform_index(rng, 2 * std::uint64_t(radius) + 1)) - radius;
}

// Standard normal samples via Box-Muller. Keeps the spare value so draws
// consume generator output in a fixed, reproducible pattern.
class GaussianSampler {
 public:
  explicit GaussianSampler(Rng& rng) : rng_(rng) {}

  double next() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform_double(rng_);  // (0, 1]
    const double u2 = uniform_double(rng_);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  Rng& rng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace trimetric

#endif  // TRIMETRIC_RNG_HPP_
