#pragma once

// Credibility factors: the best linear unbiased predictor of next-period
// claims Y_{T+1} given Y_1..Y_T, written as
//
//   Prem = alpha0 * lambda_{T+1} + sum_t alpha_t Y_t
//        = alpha0 * lambda_{T+1} + sum_t alpha*_t Y_t / lambda_t,
//
// solved from the normal equations Sigma_T alpha = Cov(Y_{1:T}, Y_{T+1}) for
// several covariance models, plus closed forms for the AR(1) state-space
// model and the heterogeneous INAR(1) model.

#include <cmath>
#include <cstdio>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "dyncred/error.hpp"
#include "dyncred/linalg.hpp"
#include "dyncred/processes.hpp"

namespace dyncred {

using linalg::SymMatrix;
using linalg::Vector;

enum class VarianceFn { identity, square };

// Variants. Each carries only its own parameters; the a-priori means
// lambda_1..lambda_{T+1} live in CovModel.

/// Time-invariant random effect: Cov(Y_i, Y_j) = lambda_i lambda_j sigma2.
struct StaticRe {
  double sigma2 = 1.0;
  EdFamily family = EdFamily::poisson();
};

/// AR(1) state-space model: Y_t | R_t ~ ED(lambda_t R_t, psi), E[R] = 1,
/// Var[R] = sigma2, Cov(R_s, R_t) = sigma2 rho^|s-t|.
struct DynamicAr1 {
  double sigma2 = 1.0;
  double rho = 0.0;
  EdFamily family = EdFamily::poisson();
  /// Overrides q*_t = psi E[V(lambda_t R_t)] for variance functions other
  /// than the Poisson and gamma ones.
  std::optional<Vector> q_star;
};

/// Y_t | R ~ ED(lambda_t (R_{t,1} + R_{t,2}), psi) with an AR(1) component
/// and an independent time-invariant component, both of mean 1.
struct TwoComponent {
  double sigma1_sq = 1.0;
  double sigma2_sq = 1.0;
  double rho = 0.0;
  double psi = 1.0;
  VarianceFn variance_fn = VarianceFn::identity;
};

/// Dynamic random effect with an unconstrained autocorrelation function
/// rho_1, rho_2, ... (lag T is needed for the cross-covariance vector).
struct ArbitraryAcf {
  double sigma2 = 1.0;
  Vector correlations;
  EdFamily family = EdFamily::poisson();
};

/// Y_t = phi Y_{t-1} + e_t + theta - theta e_{t-1}.
struct Arma11 {
  double phi = 0.0;
  double theta = 0.0;
  double sigma_e_sq = 1.0;
};

/// Heterogeneous INAR(1); every period has mean lambda / (1 - p).
struct Inar1Het {
  double lambda = 1.0;
  double p = 0.0;
  double psi0 = 1.0;
};

struct CovModel {
  std::variant<StaticRe, DynamicAr1, TwoComponent, ArbitraryAcf, Arma11, Inar1Het> variant;
  /// lambda_1..lambda_{T+1}; empty means lambda_t = 1 (or lambda/(1-p) for
  /// the INAR variant, whose means are fixed by its parameters).
  Vector lambdas;
};

struct Covariance {
  SymMatrix sigma;  // Cov(Y_i, Y_j), i, j = 1..T
  Vector cross;     // Cov(Y_t, Y_{T+1})
  Vector means;     // E[Y_1] .. E[Y_{T+1}]
  Vector lambdas;   // lambda_1 .. lambda_{T+1}
};

struct CredibilityFactors {
  double alpha0 = 0.0;  // coefficient on lambda_{T+1}
  Vector alpha;
  Vector alpha_star;    // lambda_t * alpha_t
  bool regular = false;
  bool isotonic_star = false;
  std::string model_echo;
  Vector lambdas;       // lambda_1 .. lambda_{T+1}
};

inline constexpr double sign_tolerance = -1e-12;
inline constexpr double isotonic_tolerance = 1e-12;

struct RegularityReport {
  bool regular = true;
  std::vector<std::size_t> violations;  // 1-based periods with alpha_t <= tol
};

struct IsotonicReport {
  bool isotonic = true;
  std::optional<std::size_t> first_violation;  // 1-based t with alpha*_t < alpha*_{t-1}
};

inline RegularityReport check_regular(std::span<const double> alpha) {
  RegularityReport r;
  for (std::size_t t = 0; t < alpha.size(); ++t) {
    if (!(alpha[t] > sign_tolerance)) {
      r.regular = false;
      r.violations.push_back(t + 1);
    }
  }
  return r;
}

inline RegularityReport check_regular(const CredibilityFactors& f) { return check_regular(f.alpha); }

inline IsotonicReport check_isotonic(std::span<const double> values) {
  IsotonicReport r;
  for (std::size_t t = 1; t < values.size(); ++t) {
    if (values[t] < values[t - 1] - isotonic_tolerance) {
      r.isotonic = false;
      r.first_violation = t + 1;
      break;
    }
  }
  return r;
}

inline IsotonicReport check_isotonic(const CredibilityFactors& f) { return check_isotonic(f.alpha_star); }

// ---------------------------------------------------------------------------

struct AcfSpec {
  double variance = 0.0;
  Vector autocovariance;  // lags 0..maxlag
  Vector correlations;    // lags 1..maxlag
};

inline AcfSpec arma11_acf(double phi, double theta, double sigma_e_sq, std::size_t maxlag) {
  if (!(std::abs(phi) < 1.0)) detail::fail(errc::non_stationary, "ARMA(1,1) needs |phi| < 1");
  detail::require(sigma_e_sq > 0.0 && std::isfinite(theta), errc::invalid_params,
                  "ARMA(1,1) needs sigma_e^2 > 0 and finite theta");
  AcfSpec acf;
  acf.variance = (1.0 - 2.0 * phi * theta + theta * theta) / (1.0 - phi * phi) * sigma_e_sq;
  acf.autocovariance.resize(maxlag + 1);
  acf.autocovariance[0] = acf.variance;
  if (maxlag >= 1) acf.autocovariance[1] = phi * acf.variance - theta * sigma_e_sq;
  for (std::size_t k = 2; k <= maxlag; ++k) acf.autocovariance[k] = phi * acf.autocovariance[k - 1];
  for (std::size_t k = 1; k <= maxlag; ++k) acf.correlations.push_back(acf.autocovariance[k] / acf.variance);
  return acf;
}

namespace detail {

inline std::string fmt_num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

inline void require_lambda_vector(std::span<const double> lambdas) {
  for (double l : lambdas)
    require(l > 0.0 && std::isfinite(l), errc::invalid_params, "lambdas must be positive and finite");
}

inline void require_open_rho(double rho) {
  if (!(std::abs(rho) < 1.0)) fail(errc::invalid_rho, "rho must lie in (-1, 1), got " + fmt_num(rho));
}

inline void require_variance(double v, const char* what) {
  require(v > 0.0 && std::isfinite(v), errc::invalid_params, what);
}

inline std::string family_echo(const EdFamily& f) {
  return std::string(to_string(f.kind())) + ", psi=" + fmt_num(f.psi());
}

struct EchoVisitor {
  std::string operator()(const StaticRe& m) const {
    return "static_re(sigma2=" + fmt_num(m.sigma2) + ", " + family_echo(m.family) + ")";
  }
  std::string operator()(const DynamicAr1& m) const {
    return "dynamic_ar1(sigma2=" + fmt_num(m.sigma2) + ", rho=" + fmt_num(m.rho) + ", " + family_echo(m.family) +
           (m.q_star ? ", q_star=user" : "") + ")";
  }
  std::string operator()(const TwoComponent& m) const {
    return "two_component(sigma1_sq=" + fmt_num(m.sigma1_sq) + ", sigma2_sq=" + fmt_num(m.sigma2_sq) +
           ", rho=" + fmt_num(m.rho) + ", psi=" + fmt_num(m.psi) +
           ", V=" + (m.variance_fn == VarianceFn::identity ? "x" : "x^2") + ")";
  }
  std::string operator()(const ArbitraryAcf& m) const {
    return "arbitrary_acf(sigma2=" + fmt_num(m.sigma2) + ", lags=" + std::to_string(m.correlations.size()) + ", " +
           family_echo(m.family) + ")";
  }
  std::string operator()(const Arma11& m) const {
    return "arma11(phi=" + fmt_num(m.phi) + ", theta=" + fmt_num(m.theta) + ", sigma_e_sq=" + fmt_num(m.sigma_e_sq) +
           ")";
  }
  std::string operator()(const Inar1Het& m) const {
    return "inar1_het(lambda=" + fmt_num(m.lambda) + ", p=" + fmt_num(m.p) + ", psi0=" + fmt_num(m.psi0) + ")";
  }
};

}  // namespace detail

inline std::string describe(const CovModel& model) { return std::visit(detail::EchoVisitor{}, model.variant); }

/// lambda_1..lambda_{T+1} after applying the defaults documented on CovModel.
inline Vector resolved_lambdas(const CovModel& model, std::size_t T) {
  if (const auto* inar = std::get_if<Inar1Het>(&model.variant)) {
    const double mu = inar->lambda / (1.0 - inar->p);
    if (model.lambdas.empty()) return Vector(T + 1, mu);
    detail::require(model.lambdas.size() >= T + 1, errc::dimension_mismatch, "need lambda_1..lambda_{T+1}");
    for (std::size_t t = 0; t <= T; ++t)
      detail::require(std::abs(model.lambdas[t] - mu) <= 1e-12 * mu, errc::invalid_params,
                      "INAR(1) means are fixed at lambda/(1-p)");
    return Vector(model.lambdas.begin(), model.lambdas.begin() + static_cast<std::ptrdiff_t>(T + 1));
  }
  if (model.lambdas.empty()) return Vector(T + 1, 1.0);
  detail::require(model.lambdas.size() >= T + 1, errc::dimension_mismatch, "need lambda_1..lambda_{T+1}");
  Vector out(model.lambdas.begin(), model.lambdas.begin() + static_cast<std::ptrdiff_t>(T + 1));
  detail::require_lambda_vector(out);
  return out;
}

namespace detail {

/// Fills a (T+1)x(T+1) covariance through a callback over the full index
/// range and splits it into the T x T block and the cross vector.
template <typename CovFn>
Covariance assemble(std::size_t T, Vector lambdas, Vector means, CovFn&& cov) {
  Covariance c{SymMatrix(T), Vector(T), std::move(means), std::move(lambdas)};
  for (std::size_t i = 0; i < T; ++i) {
    for (std::size_t j = i; j < T; ++j) c.sigma.set(i, j, cov(i, j));
    c.cross[i] = cov(i, T);
  }
  return c;
}

}  // namespace detail

inline Covariance build_covariance(const CovModel& model, std::size_t T) {
  detail::require(T >= 1, errc::invalid_params, "T must be >= 1");
  Vector lam = resolved_lambdas(model, T);

  return std::visit(
      [&](const auto& m) -> Covariance {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, StaticRe>) {
          detail::require_variance(m.sigma2, "sigma2 must be > 0");
          Vector means = lam;
          return detail::assemble(T, lam, means, [&](std::size_t i, std::size_t j) {
            double c = lam[i] * lam[j] * m.sigma2;
            if (i == j) c += m.family.psi() * m.family.expected_unit_variance(lam[i], m.sigma2);
            return c;
          });
        } else if constexpr (std::is_same_v<M, DynamicAr1>) {
          detail::require_variance(m.sigma2, "sigma2 must be > 0");
          detail::require_open_rho(m.rho);
          if (m.q_star) {
            detail::require(m.q_star->size() >= T, errc::dimension_mismatch, "q_star needs T entries");
            for (std::size_t t = 0; t < T; ++t) detail::require_variance((*m.q_star)[t], "q_star must be > 0");
          }
          Vector means = lam;
          return detail::assemble(T, lam, means, [&](std::size_t i, std::size_t j) {
            const auto h = static_cast<double>(j > i ? j - i : i - j);
            double c = lam[i] * lam[j] * m.sigma2 * std::pow(m.rho, h);
            if (i == j)
              c += m.q_star ? (*m.q_star)[i] : m.family.psi() * m.family.expected_unit_variance(lam[i], m.sigma2);
            return c;
          });
        } else if constexpr (std::is_same_v<M, TwoComponent>) {
          detail::require_variance(m.sigma1_sq, "sigma1_sq must be > 0");
          detail::require(m.sigma2_sq >= 0.0 && std::isfinite(m.sigma2_sq), errc::invalid_params,
                          "sigma2_sq must be >= 0");
          detail::require(m.psi >= 0.0 && std::isfinite(m.psi), errc::invalid_params, "psi must be >= 0");
          detail::require_open_rho(m.rho);
          Vector means(T + 1);
          for (std::size_t t = 0; t <= T; ++t) means[t] = 2.0 * lam[t];
          const double total_var = m.sigma1_sq + m.sigma2_sq;
          return detail::assemble(T, lam, means, [&](std::size_t i, std::size_t j) {
            const auto h = static_cast<double>(j > i ? j - i : i - j);
            double c = lam[i] * lam[j] * (m.sigma1_sq * std::pow(m.rho, h) + m.sigma2_sq);
            if (i == j) {
              // E[V(lambda S)] with S = R_1 + R_2, E[S] = 2, Var[S] = sigma1^2 + sigma2^2
              const double ev = m.variance_fn == VarianceFn::identity ? 2.0 * lam[i]
                                                                       : lam[i] * lam[i] * (total_var + 4.0);
              c += m.psi * ev;
            }
            return c;
          });
        } else if constexpr (std::is_same_v<M, ArbitraryAcf>) {
          detail::require_variance(m.sigma2, "sigma2 must be > 0");
          detail::require(m.correlations.size() >= T, errc::invalid_params,
                          "arbitrary ACF needs correlations out to lag T");
          for (double r : m.correlations) detail::require_open_rho(r);
          Vector means = lam;
          return detail::assemble(T, lam, means, [&](std::size_t i, std::size_t j) {
            const std::size_t h = j > i ? j - i : i - j;
            if (h == 0) return lam[i] * lam[i] * m.sigma2 + m.family.psi() * m.family.expected_unit_variance(lam[i], m.sigma2);
            return lam[i] * lam[j] * m.sigma2 * m.correlations[h - 1];
          });
        } else if constexpr (std::is_same_v<M, Arma11>) {
          const AcfSpec acf = arma11_acf(m.phi, m.theta, m.sigma_e_sq, T);
          Vector means = lam;
          return detail::assemble(T, lam, means, [&](std::size_t i, std::size_t j) {
            return acf.autocovariance[j > i ? j - i : i - j];
          });
        } else {
          static_assert(std::is_same_v<M, Inar1Het>);
          detail::require_variance(m.lambda, "lambda must be > 0");
          detail::require(m.p >= 0.0 && m.p < 1.0, errc::invalid_params, "p must lie in [0, 1)");
          detail::require(m.psi0 >= 0.0 && std::isfinite(m.psi0), errc::invalid_params, "psi0 must be >= 0");
          const double mu = m.lambda / (1.0 - m.p);
          Vector means(T + 1, mu);
          return detail::assemble(T, lam, means, [&](std::size_t i, std::size_t j) {
            const auto h = static_cast<double>(j > i ? j - i : i - j);
            return mu * (std::pow(m.p, h) + mu * m.psi0);
          });
        }
      },
      model.variant);
}

namespace detail {

inline CredibilityFactors finish(Vector alpha, const Vector& means, const Vector& lambdas, std::string echo) {
  const std::size_t T = alpha.size();
  CredibilityFactors f;
  f.alpha = std::move(alpha);
  f.alpha_star.resize(T);
  double weighted = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    f.alpha_star[t] = lambdas[t] * f.alpha[t];
    weighted += f.alpha[t] * means[t];
  }
  f.alpha0 = (means[T] - weighted) / lambdas[T];
  f.regular = check_regular(f.alpha).regular;
  f.isotonic_star = check_isotonic(f.alpha_star).isotonic;
  f.model_echo = std::move(echo);
  f.lambdas = lambdas;
  return f;
}

}  // namespace detail

/// General route: alpha = Sigma_T^{-1} Cov(Y_{1:T}, Y_{T+1}).
inline CredibilityFactors credibility_factors(const CovModel& model, std::size_t T) {
  const Covariance cov = build_covariance(model, T);
  Vector alpha = linalg::solve_spd(cov.sigma, cov.cross);
  return detail::finish(std::move(alpha), cov.means, cov.lambdas, describe(model));
}

/// q*_t = psi E[V(lambda_t R_t)] of the AR(1) state-space model.
inline Vector q_star(const DynamicAr1& m, std::span<const double> lambdas, std::size_t T) {
  Vector q(T);
  for (std::size_t t = 0; t < T; ++t)
    q[t] = m.q_star ? (*m.q_star)[t] : m.family.psi() * m.family.expected_unit_variance(lambdas[t], m.sigma2);
  return q;
}

/// Closed form for the AR(1) state-space model through the u/v recursion:
/// alpha*_t = rho (1 - rho^2) sigma2 lambda_{T+1} v_T u_t lambda_t^2 / q*_t
/// with xi_t = sigma2 (1 - rho^2) lambda_t^2 / q*_t.
inline CredibilityFactors closed_form_factors_model1(const CovModel& model, std::size_t T) {
  const auto* m = std::get_if<DynamicAr1>(&model.variant);
  if (m == nullptr) detail::fail(errc::invalid_variant, "closed form applies to the dynamic AR(1) model only");
  detail::require(T >= 2, errc::invalid_params, "closed form needs T >= 2");
  detail::require_variance(m->sigma2, "sigma2 must be > 0");
  detail::require_open_rho(m->rho);
  if (m->q_star) detail::require(m->q_star->size() >= T, errc::dimension_mismatch, "q_star needs T entries");

  const Vector lam = resolved_lambdas(model, T);
  const Vector q = q_star(*m, lam, T);
  const double rho = m->rho;
  const double one_minus_r2 = 1.0 - rho * rho;

  Vector xi(T);
  for (std::size_t t = 0; t < T; ++t) xi[t] = m->sigma2 * one_minus_r2 * lam[t] * lam[t] / q[t];
  const linalg::UvSequences uv = linalg::tridiag_uv(xi, rho);

  const Vector col = uv.last_column();
  const double scale = rho * one_minus_r2 * m->sigma2 * lam[T];
  CredibilityFactors f;
  f.alpha.resize(T);
  f.alpha_star.resize(T);
  double star_sum = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    f.alpha_star[t] = scale * col[t] * lam[t] * lam[t] / q[t];
    f.alpha[t] = scale * col[t] * lam[t] / q[t];
    star_sum += f.alpha_star[t];
  }
  f.alpha0 = 1.0 - star_sum / lam[T];
  f.regular = check_regular(f.alpha).regular;
  f.isotonic_star = check_isotonic(f.alpha_star).isotonic;
  f.model_echo = describe(model) + " [closed form]";
  f.lambdas = lam;
  return f;
}

namespace detail {
inline void require_inar(double lambda, double p, double psi0, std::size_t t) {
  require(lambda > 0.0 && std::isfinite(lambda), errc::invalid_params, "lambda must be > 0");
  require(p >= 0.0 && p < 1.0, errc::invalid_params, "p must lie in [0, 1)");
  require(psi0 >= 0.0 && std::isfinite(psi0), errc::invalid_params, "psi0 must be >= 0");
  require(t >= 3, errc::invalid_params, "INAR(1) closed form needs t >= 3");
}

inline double inar_denominator(double b, double p, std::size_t t) {
  const auto tt = static_cast<double>(t);
  return b * (tt - p * (tt - 2.0)) + 1.0 + p;
}
}  // namespace detail

/// Closed-form factors of the heterogeneous INAR(1) model with b =
/// lambda psi0 / (1 - p): alpha_1 = b (1-p) / D, alpha_j = (1-p) alpha_1 for
/// interior j, alpha_t = alpha_1 + p, D = b (t - p (t-2)) + 1 + p.
/// alpha0 is the coefficient on lambda_{t+1} = lambda / (1 - p).
inline CredibilityFactors inar1_closed_form(double lambda, double p, double psi0, std::size_t t) {
  detail::require_inar(lambda, p, psi0, t);
  const double b = lambda * psi0 / (1.0 - p);
  const double a1 = b * (1.0 - p) / detail::inar_denominator(b, p, t);
  Vector alpha(t, (1.0 - p) * a1);
  alpha.front() = a1;
  alpha.back() = a1 + p;
  const double mu = lambda / (1.0 - p);
  const Vector means(t + 1, mu);
  CovModel model{Inar1Het{lambda, p, psi0}, {}};
  return detail::finish(std::move(alpha), means, means, describe(model) + " [closed form]");
}

/// The same predictor's constant term in absolute units,
/// lambda (1 - p^2) / ((1 - p) D), i.e. alpha0 * lambda / (1 - p).
inline double inar1_intercept(double lambda, double p, double psi0, std::size_t t) {
  detail::require_inar(lambda, p, psi0, t);
  const double b = lambda * psi0 / (1.0 - p);
  return lambda * (1.0 - p * p) / ((1.0 - p) * detail::inar_denominator(b, p, t));
}

/// Harvey-Fernandez exponential moving average predictor
/// lambda_{t+1} (a0 + sum alpha^{-tau} y_tau) / (a0 + sum alpha^{-tau} lambda_tau).
inline double harvey_fernandez_predict(std::span<const double> y, std::span<const double> lambdas, double lambda_next,
                                       double a0, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) detail::fail(errc::invalid_alpha, "alpha must lie in (0, 1]");
  detail::require(a0 > 0.0 && std::isfinite(a0), errc::invalid_params, "a0 must be > 0");
  detail::require(lambda_next > 0.0, errc::invalid_params, "lambda_next must be > 0");
  detail::require(y.size() == lambdas.size(), errc::dimension_mismatch, "y and lambdas differ in length");
  detail::require_lambda_vector(lambdas);
  // Multiply through by alpha^t so the weights alpha^{t-tau} stay <= 1.
  const std::size_t t = y.size();
  double num = a0 * std::pow(alpha, static_cast<double>(t));
  double den = num;
  double w = 1.0;
  for (std::size_t k = t; k-- > 0;) {
    num += w * y[k];
    den += w * lambdas[k];
    w *= alpha;
  }
  return lambda_next * num / den;
}

}  // namespace dyncred
