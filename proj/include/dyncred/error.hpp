#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dyncred {

enum class errc {
  not_positive_definite,
  invalid_rho,
  invalid_params,
  invalid_alpha,
  invalid_sigma,
  invalid_variant,
  non_stationary,
  singular_update,
  unsupported_variance_fn,
  missing_truth,
  degenerate_denominator,
  particle_degeneracy,
  rank_deficient,
  dimension_mismatch,
  unknown_table,
  invalid_config,
  io,
};

constexpr std::string_view to_string(errc code) noexcept {
  switch (code) {
    case errc::not_positive_definite: return "NotPositiveDefinite";
    case errc::invalid_rho: return "InvalidRho";
    case errc::invalid_params: return "InvalidParams";
    case errc::invalid_alpha: return "InvalidAlpha";
    case errc::invalid_sigma: return "InvalidSigma";
    case errc::invalid_variant: return "InvalidVariant";
    case errc::non_stationary: return "NonStationary";
    case errc::singular_update: return "SingularUpdate";
    case errc::unsupported_variance_fn: return "UnsupportedVarianceFn";
    case errc::missing_truth: return "MissingTruth";
    case errc::degenerate_denominator: return "DegenerateDenominator";
    case errc::particle_degeneracy: return "ParticleDegeneracy";
    case errc::rank_deficient: return "RankDeficient";
    case errc::dimension_mismatch: return "DimensionMismatch";
    case errc::unknown_table: return "UnknownTable";
    case errc::invalid_config: return "InvalidConfig";
    case errc::io: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class error : public std::runtime_error {
 public:
  error(errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

namespace detail {

[[noreturn]] inline void fail(errc code, const std::string& what) {
  throw error(code, what);
}

inline void require(bool condition, errc code, const char* what) {
  if (!condition) fail(code, what);
}

}  // namespace detail
}  // namespace dyncred
