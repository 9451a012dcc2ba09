#pragma once

// Deterministic random variates. The engine is std::mt19937_64 (its output
// sequence is fixed by the standard); every variate below is generated by
// code in this file rather than by <random> distributions, whose algorithms
// differ between standard library implementations. Independent streams are
// derived from (master seed, index) through SplitMix64.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>

#include "dyncred/error.hpp"

namespace dyncred {

inline constexpr std::string_view rng_algorithm = "mt19937_64+splitmix64-streams";

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  /// Stream `index` of `master`; streams of distinct indices are independent
  /// for practical purposes and do not depend on generation order.
  static Rng stream(std::uint64_t master, std::uint64_t index) {
    return Rng(splitmix64(master) ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double exponential(double rate) { return -std::log(uniform()) / rate; }

  /// log of a Gamma(shape, 1) variate; stays finite for tiny shapes where
  /// the variate itself underflows.
  double log_standard_gamma(double shape) {
    if (shape >= 1.0) return std::log(marsaglia_tsang(shape));
    return std::log(marsaglia_tsang(shape + 1.0)) + std::log(uniform()) / shape;
  }

  double gamma(double shape, double scale) {
    detail::require(shape > 0.0 && scale > 0.0, errc::invalid_params, "gamma needs shape, scale > 0");
    if (shape >= 1.0) return scale * marsaglia_tsang(shape);
    return scale * std::exp(log_standard_gamma(shape));
  }

  /// Beta(a, b) with the degenerate limits Beta(0, b) = 0 and Beta(a, 0) = 1.
  double beta(double a, double b) {
    detail::require(a >= 0.0 && b >= 0.0 && a + b > 0.0, errc::invalid_params, "beta needs a, b >= 0");
    if (a == 0.0) return 0.0;
    if (b == 0.0) return 1.0;
    const double la = log_standard_gamma(a);
    const double lb = log_standard_gamma(b);
    return 1.0 / (1.0 + std::exp(lb - la));
  }

  std::uint64_t poisson(double mean) {
    detail::require(mean >= 0.0 && std::isfinite(mean), errc::invalid_params, "poisson needs finite mean >= 0");
    if (mean == 0.0) return 0;
    if (mean < 10.0) {
      const double limit = std::exp(-mean);
      std::uint64_t k = 0;
      double prod = uniform();
      while (prod > limit) {
        ++k;
        prod *= uniform();
      }
      return k;
    }
    return poisson_ptrs(mean);
  }

  std::uint64_t binomial(std::uint64_t n, double p) {
    detail::require(p >= 0.0 && p <= 1.0, errc::invalid_params, "binomial needs p in [0,1]");
    std::uint64_t offset = 0;
    // Beta splitting keeps the work logarithmic in n and the draw exact.
    while (n >= 64) {
      if (p == 0.0) return offset;
      if (p == 1.0) return offset + n;
      const std::uint64_t a = 1 + n / 2;
      const std::uint64_t b = n - a + 1;
      const double x = beta(static_cast<double>(a), static_cast<double>(b));
      if (x >= p) {
        n = a - 1;
        p = p / x;
      } else {
        offset += a;
        n = b - 1;
        p = (p - x) / (1.0 - x);
      }
    }
    std::uint64_t k = 0;
    for (std::uint64_t i = 0; i < n; ++i) k += uniform() < p ? 1 : 0;
    return offset + k;
  }

 private:
  double marsaglia_tsang(double shape) {
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  // Hormann's transformed rejection with squeeze (PTRS), mean >= 10.
  std::uint64_t poisson_ptrs(double lam) {
    const double slam = std::sqrt(lam);
    const double loglam = std::log(lam);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
      const double u = uniform() - 0.5;
      const double v = uniform();
      const double us = 0.5 - std::abs(u);
      const double k = std::floor((2.0 * a / us + b) * u + lam + 0.43);
      if (us >= 0.07 && v <= vr) return static_cast<std::uint64_t>(k);
      if (k < 0.0 || (us < 0.013 && v > us)) continue;
      if (std::log(v) + std::log(invalpha) - std::log(a / (us * us) + b) <=
          -lam + k * loglam - std::lgamma(k + 1.0))
        return static_cast<std::uint64_t>(k);
    }
  }

  std::mt19937_64 engine_;
};

}  // namespace dyncred
