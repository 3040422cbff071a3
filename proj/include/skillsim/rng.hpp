#pragma once
#include <cmath>
#include <cstdint>
#include <random>

namespace skillsim {

// mt19937_64 with hand-rolled uniform/gaussian transforms so that streams are
// bit-identical across standard library implementations.
struct Rng {
  std::mt19937_64 gen;

  explicit Rng(uint64_t seed = 0) : gen(seed) {}

  uint64_t raw() { return gen(); }

  // uniform in [0, 1), 53-bit resolution
  double uniform() { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller, one fresh pair of uniforms per call (no cached spare: keeps the
  // stream position independent of call parity)
  double gaussian() {
    double u1;
    do { u1 = uniform(); } while (u1 <= 0.0);
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  // integer in [0, n), rejection sampled to avoid modulo bias
  uint64_t below(uint64_t n) {
    uint64_t lim = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do { x = gen(); } while (x >= lim);
    return x % n;
  }

  int bit() { return static_cast<int>(gen() >> 63); }
};

}  // namespace skillsim
