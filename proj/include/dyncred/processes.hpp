#pragma once

// Latent state processes with unit-mean gamma marginals, the observation
// layer (Poisson or gamma given the state), and claim panel generation.
//
// Gamma(mean m, dispersion psi) means mean m and variance m^2 psi, i.e.
// shape 1/psi and scale m psi. All modules use this bridge.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dyncred/error.hpp"
#include "dyncred/random.hpp"

namespace dyncred {

enum class StateFamily { bgar1, arg1, gar1, iid, constant };

constexpr std::string_view to_string(StateFamily f) noexcept {
  switch (f) {
    case StateFamily::bgar1: return "bgar1";
    case StateFamily::arg1: return "arg1";
    case StateFamily::gar1: return "gar1";
    case StateFamily::iid: return "iid";
    case StateFamily::constant: return "constant";
  }
  return "unknown";
}

struct StatePath {
  std::vector<double> values;  // R_0 .. R_T
  StateFamily family = StateFamily::constant;
  std::map<std::string, double> params;
  std::uint64_t seed = 0;
};

enum class EdKind { poisson, gamma };

/// Reproductive exponential dispersion family with Var = psi * V(mean).
class EdFamily {
 public:
  static EdFamily poisson() { return EdFamily(EdKind::poisson, 1.0); }

  static EdFamily gamma(double psi) {
    detail::require(psi > 0.0 && std::isfinite(psi), errc::invalid_params, "gamma dispersion must be > 0");
    return EdFamily(EdKind::gamma, psi);
  }

  EdKind kind() const noexcept { return kind_; }
  double psi() const noexcept { return psi_; }

  double unit_variance(double mean) const noexcept {
    return kind_ == EdKind::poisson ? mean : mean * mean;
  }

  /// E[V(lambda R)] for E[R] = 1, Var[R] = sigma2.
  double expected_unit_variance(double lambda, double sigma2) const noexcept {
    return kind_ == EdKind::poisson ? lambda : lambda * lambda * (1.0 + sigma2);
  }

  double sample(Rng& rng, double mean) const {
    if (kind_ == EdKind::poisson) return static_cast<double>(rng.poisson(mean));
    return rng.gamma(1.0 / psi_, mean * psi_);
  }

  /// log f(y | mean), dropping terms that do not depend on the mean.
  double log_likelihood_kernel(double y, double mean) const noexcept {
    if (kind_ == EdKind::poisson) return (y > 0.0 ? y * std::log(mean) : 0.0) - mean;
    return -(y / mean + std::log(mean)) / psi_;
  }

  friend bool operator==(const EdFamily&, const EdFamily&) = default;

 private:
  EdFamily(EdKind kind, double psi) : kind_(kind), psi_(psi) {}
  EdKind kind_;
  double psi_;
};

constexpr std::string_view to_string(EdKind k) noexcept {
  return k == EdKind::poisson ? "poisson" : "gamma";
}

// ---------------------------------------------------------------------------
// Raw simulators. Each returns R_0..R_T started from the stationary law.

namespace detail {

inline double bgar1_step(Rng& rng, double r, double gamma_param, double rho, double sigma2) {
  const double b = rng.beta(gamma_param * rho, gamma_param * (1.0 - rho));
  const double g = rho < 1.0 ? rng.gamma(gamma_param * (1.0 - rho), sigma2) : 0.0;
  return b * r + g;
}

inline double arg1_step(Rng& rng, double r, double rho, double c, double delta) {
  const auto z = rng.poisson(rho * r / c);
  return rng.gamma(delta + static_cast<double>(z), c);
}

inline double gar1_innovation(Rng& rng, double shape, double rate, double rho) {
  if (shape == 1.0) return rng.uniform() < rho ? 0.0 : rng.exponential(rate);
  // Shot noise: N ~ Poisson(shape ln(1/rho)) exponential jumps damped by rho^U.
  const auto n = rng.poisson(shape * std::log(1.0 / rho));
  double eps = 0.0;
  for (std::uint64_t i = 0; i < n; ++i) eps += rng.exponential(rate) * std::pow(rho, rng.uniform());
  return eps;
}

inline void require_positive(double x, const char* what) {
  require(x > 0.0 && std::isfinite(x), errc::invalid_params, what);
}

}  // namespace detail

/// Beta-gamma AR(1) with gamma_1 = gamma_2 = 1/sigma2 (mean 1, variance
/// sigma2, lag-h autocovariance sigma2 rho^h). rho = 1 is the static limit
/// and comes back as the CONSTANT family.
inline StatePath simulate_bgar1(double sigma2, double rho, std::size_t T, std::uint64_t seed) {
  detail::require_positive(sigma2, "bgar1 needs sigma2 > 0");
  if (!(rho >= 0.0 && rho <= 1.0)) detail::fail(errc::invalid_rho, "bgar1 needs rho in [0,1]");
  Rng rng(seed);
  const double g = 1.0 / sigma2;
  StatePath path;
  path.seed = seed;
  path.params = {{"sigma2", sigma2}, {"rho", rho}};
  path.values.resize(T + 1);
  path.values[0] = rng.gamma(g, sigma2);
  if (rho == 1.0) {
    path.family = StateFamily::constant;
    for (std::size_t t = 1; t <= T; ++t) path.values[t] = path.values[0];
    return path;
  }
  path.family = StateFamily::bgar1;
  for (std::size_t t = 1; t <= T; ++t)
    path.values[t] = detail::bgar1_step(rng, path.values[t - 1], g, rho, sigma2);
  return path;
}

/// Autoregressive gamma process: Z ~ Poisson(rho R_t / c),
/// R_{t+1} ~ Gamma(shape delta + Z, scale c); stationary law
/// Gamma(shape delta, scale c / (1 - rho)).
inline StatePath simulate_arg1(double rho, double c, double delta, std::size_t T, std::uint64_t seed) {
  if (!(rho >= 0.0 && rho < 1.0)) detail::fail(errc::invalid_params, "arg1 needs rho in [0,1)");
  detail::require_positive(c, "arg1 needs c > 0");
  detail::require_positive(delta, "arg1 needs delta > 0");
  Rng rng(seed);
  StatePath path;
  path.family = StateFamily::arg1;
  path.seed = seed;
  path.params = {{"rho", rho}, {"c", c}, {"delta", delta}};
  path.values.resize(T + 1);
  path.values[0] = rng.gamma(delta, c / (1.0 - rho));
  for (std::size_t t = 1; t <= T; ++t) path.values[t] = detail::arg1_step(rng, path.values[t - 1], rho, c, delta);
  return path;
}

/// Gaver-Lewis gamma AR(1): R_{t+1} = rho R_t + eps_{t+1} with the
/// innovation law that keeps the Gamma(shape, rate) marginal.
inline StatePath simulate_gar1(double shape, double rate, double rho, std::size_t T, std::uint64_t seed) {
  detail::require_positive(shape, "gar1 needs shape > 0");
  detail::require_positive(rate, "gar1 needs rate > 0");
  if (!(rho > 0.0 && rho < 1.0)) detail::fail(errc::invalid_params, "gar1 needs rho in (0,1)");
  Rng rng(seed);
  StatePath path;
  path.family = StateFamily::gar1;
  path.seed = seed;
  path.params = {{"shape", shape}, {"rate", rate}, {"rho", rho}};
  path.values.resize(T + 1);
  path.values[0] = rng.gamma(shape, 1.0 / rate);
  for (std::size_t t = 1; t <= T; ++t)
    path.values[t] = rho * path.values[t - 1] + detail::gar1_innovation(rng, shape, rate, rho);
  return path;
}

/// Heterogeneous INAR(1): R ~ Gamma(mean 1, variance psi0) once per path,
/// Y_1 ~ Poisson(lambda R / (1 - p)), Y_t = Binomial(Y_{t-1}, p) + Poisson(lambda R).
inline std::vector<std::int64_t> simulate_inar1_het(double lambda, double p, double psi0, std::size_t T,
                                                    std::uint64_t seed) {
  detail::require_positive(lambda, "inar1 needs lambda > 0");
  detail::require(p >= 0.0 && p < 1.0, errc::invalid_params, "inar1 needs p in [0,1)");
  detail::require(psi0 >= 0.0 && std::isfinite(psi0), errc::invalid_params, "inar1 needs psi0 >= 0");
  Rng rng(seed);
  const double r = psi0 > 0.0 ? rng.gamma(1.0 / psi0, psi0) : 1.0;
  std::vector<std::int64_t> y(T);
  if (T == 0) return y;
  auto prev = rng.poisson(lambda * r / (1.0 - p));
  y[0] = static_cast<std::int64_t>(prev);
  for (std::size_t t = 1; t < T; ++t) {
    prev = rng.binomial(prev, p) + rng.poisson(lambda * r);
    y[t] = static_cast<std::int64_t>(prev);
  }
  return y;
}

// ---------------------------------------------------------------------------
// Unit-mean state specification shared by panel simulation and the particle
// filter: E[R] = 1, Var[R] = sigma2, Cov(R_t, R_{t+h}) = sigma2 rho^h.

struct StateSpec {
  StateFamily family = StateFamily::bgar1;
  double sigma2 = 1.0;
  double rho = 0.0;

  void validate() const {
    detail::require(sigma2 >= 0.0 && std::isfinite(sigma2), errc::invalid_params, "state sigma2 must be >= 0");
    switch (family) {
      case StateFamily::bgar1:
        if (!(rho >= 0.0 && rho <= 1.0)) detail::fail(errc::invalid_rho, "bgar1 needs rho in [0,1]");
        break;
      case StateFamily::arg1:
        if (!(rho >= 0.0 && rho < 1.0)) detail::fail(errc::invalid_rho, "arg1 needs rho in [0,1)");
        break;
      case StateFamily::gar1:
        if (!(rho >= 0.0 && rho < 1.0)) detail::fail(errc::invalid_rho, "gar1 needs rho in [0,1)");
        break;
      case StateFamily::iid:
      case StateFamily::constant:
        break;
    }
  }

  /// The family actually simulated once limits are resolved.
  StateFamily effective_family() const noexcept {
    if (sigma2 == 0.0) return StateFamily::constant;
    if (family == StateFamily::bgar1 && rho == 1.0) return StateFamily::constant;
    if ((family == StateFamily::bgar1 || family == StateFamily::arg1 || family == StateFamily::gar1) && rho == 0.0)
      return StateFamily::iid;
    return family;
  }

  double draw_stationary(Rng& rng) const {
    if (sigma2 == 0.0) return 1.0;
    const double g = 1.0 / sigma2;
    return rng.gamma(g, sigma2);
  }

  double transition(Rng& rng, double r) const {
    const double g = sigma2 > 0.0 ? 1.0 / sigma2 : 0.0;
    switch (effective_family()) {
      case StateFamily::constant: return r;
      case StateFamily::iid: return rng.gamma(g, sigma2);
      case StateFamily::bgar1: return detail::bgar1_step(rng, r, g, rho, sigma2);
      case StateFamily::arg1: return detail::arg1_step(rng, r, rho, sigma2 * (1.0 - rho), g);
      case StateFamily::gar1: return rho * r + detail::gar1_innovation(rng, g, g, rho);
    }
    return r;
  }

  /// R_0 .. R_T
  std::vector<double> simulate(Rng& rng, std::size_t T) const {
    std::vector<double> v(T + 1);
    v[0] = draw_stationary(rng);
    for (std::size_t t = 1; t <= T; ++t) v[t] = transition(rng, v[t - 1]);
    return v;
  }
};

// ---------------------------------------------------------------------------
// Claim panels

struct ClaimRecord {
  std::string policy_id;
  int period = 1;
  double lambda = 1.0;
  double y = 0.0;
  std::vector<double> covariates;
  std::optional<double> true_r;
};

struct ClaimPanel {
  std::vector<ClaimRecord> records;
  std::size_t n_covariates = 0;
  std::string rng_algorithm{dyncred::rng_algorithm};
  std::uint64_t seed = 0;
};

struct CovariateLaw {
  double mean = 0.0;
  double variance = 0.6;
};

struct PanelSpec {
  std::size_t n_policies = 500;
  std::size_t T = 5;  // training periods; period T+1 is the holdout
  StateSpec state;
  EdFamily family = EdFamily::poisson();
  std::vector<double> beta{-3.0, 2.0};  // intercept first
  CovariateLaw covariates;
  std::uint64_t seed = 1;

  void validate() const {
    detail::require(n_policies >= 1, errc::invalid_params, "n_policies must be >= 1");
    detail::require(T >= 1, errc::invalid_params, "T must be >= 1");
    detail::require(!beta.empty(), errc::invalid_params, "beta needs at least an intercept");
    detail::require(covariates.variance >= 0.0, errc::invalid_params, "covariate variance must be >= 0");
    state.validate();
  }
};

inline std::string policy_label(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "P%06zu", index + 1);
  return buf;
}

/// One independent stream per policy, so the panel does not depend on the
/// order in which policies are generated.
inline ClaimPanel simulate_panel(const PanelSpec& spec) {
  spec.validate();
  const std::size_t k = spec.beta.size() - 1;
  const std::size_t periods = spec.T + 1;
  const double sd = std::sqrt(spec.covariates.variance);
  ClaimPanel panel;
  panel.n_covariates = k;
  panel.seed = spec.seed;
  panel.records.reserve(spec.n_policies * periods);
  for (std::size_t i = 0; i < spec.n_policies; ++i) {
    Rng rng = Rng::stream(spec.seed, i);
    const std::string id = policy_label(i);
    const std::vector<double> r = spec.state.simulate(rng, periods);
    for (std::size_t t = 1; t <= periods; ++t) {
      ClaimRecord rec;
      rec.policy_id = id;
      rec.period = static_cast<int>(t);
      rec.covariates.resize(k);
      double eta = spec.beta[0];
      for (std::size_t j = 0; j < k; ++j) {
        rec.covariates[j] = spec.covariates.mean + sd * rng.normal();
        eta += spec.beta[j + 1] * rec.covariates[j];
      }
      rec.lambda = std::exp(eta);
      rec.true_r = r[t];
      rec.y = spec.family.sample(rng, rec.lambda * r[t]);
      panel.records.push_back(std::move(rec));
    }
  }
  return panel;
}

/// Per-policy view of a panel, periods in order.
struct PolicyHistory {
  std::string policy_id;
  std::vector<double> lambda;
  std::vector<double> y;
  std::vector<std::vector<double>> covariates;
  std::vector<std::optional<double>> true_r;

  std::size_t periods() const noexcept { return y.size(); }
};

/// Groups records by policy (first-appearance order) and checks that each
/// policy's periods run 1, 2, ... without gaps and that every lambda > 0.
inline std::vector<PolicyHistory> group_by_policy(const ClaimPanel& panel) {
  std::vector<PolicyHistory> out;
  std::map<std::string, std::size_t> index;
  for (const auto& rec : panel.records) {
    detail::require(rec.lambda > 0.0 && std::isfinite(rec.lambda), errc::invalid_params,
                    "every record needs lambda > 0");
    auto [it, inserted] = index.try_emplace(rec.policy_id, out.size());
    if (inserted) out.push_back(PolicyHistory{rec.policy_id, {}, {}, {}, {}});
    auto& h = out[it->second];
    if (rec.period != static_cast<int>(h.periods()) + 1)
      detail::fail(errc::invalid_params, "policy " + rec.policy_id + ": periods must be consecutive from 1");
    h.lambda.push_back(rec.lambda);
    h.y.push_back(rec.y);
    h.covariates.push_back(rec.covariates);
    h.true_r.push_back(rec.true_r);
  }
  return out;
}

}  // namespace dyncred
