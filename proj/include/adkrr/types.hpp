#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace adkrr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// A run configuration that cannot yield a valid protocol (e.g. the
/// theoretical ladder cap collapses below 2). The message carries a
/// remediation hint.
class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An inconsistent or missing message inside a protocol round.
class protocol_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// splitmix64 step; used to derive independent sub-seeds from one run seed.
inline uint64_t mix_seed(uint64_t seed, uint64_t salt) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seeded generator with explicit double mappings so streams do not depend
/// on standard-library distribution internals.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed ? seed : 0x6a09e667f3bcc909ULL) {
    // warm up past low-entropy seeds
    next();
    next();
  }

  uint64_t next() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// uniform in [0, 1)
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// +1 or -1 with equal probability
  double sign() { return (next() & 1u) ? 1.0 : -1.0; }

  /// standard normal via Box-Muller
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    double u2 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace adkrr
