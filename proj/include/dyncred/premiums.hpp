#pragma once

// Premium strategies for next-period claims, moment estimation of the state
// parameters, and the out-of-sample evaluation harness.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dyncred/credibility.hpp"
#include "dyncred/error.hpp"
#include "dyncred/glm.hpp"
#include "dyncred/processes.hpp"
#include "dyncred/random.hpp"

namespace dyncred {

enum class Method { naive, static_re, proposed, exact_smc, true_premium, harvey };

inline constexpr Method all_methods[] = {Method::naive,     Method::static_re,    Method::proposed,
                                         Method::exact_smc, Method::true_premium, Method::harvey};

constexpr std::string_view to_string(Method m) noexcept {
  switch (m) {
    case Method::naive: return "NAIVE";
    case Method::static_re: return "STATIC";
    case Method::proposed: return "PROPOSED";
    case Method::exact_smc: return "EXACT_SMC";
    case Method::true_premium: return "TRUE";
    case Method::harvey: return "HARVEY";
  }
  return "?";
}

inline Method method_from_string(std::string_view s) {
  for (Method m : all_methods)
    if (to_string(m) == s) return m;
  detail::fail(errc::invalid_config, "unknown premium method '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Single-policy premiums

inline double naive_premium(double lambda_next) {
  detail::require(lambda_next > 0.0, errc::invalid_params, "lambda_next must be > 0");
  return lambda_next;
}

/// Gamma-Poisson conjugate premium of the time-invariant random effect.
inline double static_premium(std::span<const double> y, std::span<const double> lambdas, double sigma2,
                             double lambda_next) {
  if (!(sigma2 > 0.0 && std::isfinite(sigma2))) detail::fail(errc::invalid_sigma, "static premium needs sigma2 > 0");
  detail::require(y.size() == lambdas.size(), errc::dimension_mismatch, "y and lambdas differ in length");
  detail::require(lambda_next > 0.0, errc::invalid_params, "lambda_next must be > 0");
  const double prior = 1.0 / sigma2;
  double sy = 0.0, sl = 0.0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    sy += y[t];
    sl += lambdas[t];
  }
  return lambda_next * (sy + prior) / (sl + prior);
}

/// alpha0 lambda_{T+1} + sum_t alpha_t y_t with factors computed for these
/// lambdas (f.lambdas holds lambda_1..lambda_{T+1}). Not clipped at zero.
inline double proposed_premium(std::span<const double> y, const CredibilityFactors& f) {
  detail::require(y.size() == f.alpha.size() && f.lambdas.size() == y.size() + 1, errc::dimension_mismatch,
                  "claims do not match the factor dimension");
  double p = f.alpha0 * f.lambdas.back();
  for (std::size_t t = 0; t < y.size(); ++t) p += f.alpha[t] * y[t];
  return p;
}

inline double proposed_premium(std::span<const double> y, const CovModel& model) {
  return proposed_premium(y, credibility_factors(model, y.size()));
}

inline double true_premium(std::optional<double> true_r_next, double lambda_next) {
  if (!true_r_next) detail::fail(errc::missing_truth, "true premium needs the realized R_{T+1}");
  return *true_r_next * lambda_next;
}

// ---------------------------------------------------------------------------
// Exact premium E[Y_{T+1} | y_1..y_T] by a bootstrap particle filter.

struct SmcResult {
  double premium = 0.0;
  double std_error = 0.0;
  double min_ess = 0.0;
  int resamples = 0;
};

inline constexpr double particle_degeneracy_ess = 10.0;

/// `lambdas` holds lambda_1..lambda_{T+1}. Resamples systematically when the
/// effective sample size drops below half the particle count. The standard
/// error groups particles by their time-1 ancestor, which accounts for the
/// dependence that resampling introduces.
inline SmcResult exact_premium_smc(std::span<const double> y, std::span<const double> lambdas, const StateSpec& state,
                                   const EdFamily& family, std::size_t n_particles, std::uint64_t seed) {
  state.validate();
  const std::size_t T = y.size();
  detail::require(T >= 1, errc::invalid_params, "need at least one observed period");
  detail::require(lambdas.size() == T + 1, errc::dimension_mismatch, "need lambda_1..lambda_{T+1}");
  detail::require(n_particles >= 2 * static_cast<std::size_t>(particle_degeneracy_ess), errc::invalid_params,
                  "need at least 20 particles");
  detail::require_lambda_vector(lambdas);
  if (family.kind() == EdKind::gamma)
    for (double v : y) detail::require(v > 0.0, errc::invalid_params, "gamma claims must be > 0");

  const std::size_t n = n_particles;
  Rng rng(seed);
  std::vector<double> r(n), logw(n, 0.0), w(n), scratch(n);
  std::vector<std::size_t> eve(n), eve_scratch(n);
  for (std::size_t i = 0; i < n; ++i) {
    r[i] = state.draw_stationary(rng);
    eve[i] = i;
  }

  SmcResult out;
  out.min_ess = static_cast<double>(n);
  auto normalize = [&] {
    const double mx = *std::max_element(logw.begin(), logw.end());
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += (w[i] = std::exp(logw[i] - mx));
    double s2 = 0.0;
    for (double& wi : w) {
      wi /= s;
      s2 += wi * wi;
    }
    return 1.0 / s2;
  };

  for (std::size_t t = 0; t < T; ++t) {
    if (t > 0)
      for (double& ri : r) ri = state.transition(rng, ri);
    for (std::size_t i = 0; i < n; ++i) logw[i] += family.log_likelihood_kernel(y[t], lambdas[t] * r[i]);
    const double ess = normalize();
    out.min_ess = std::min(out.min_ess, ess);
    if (ess < particle_degeneracy_ess) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "effective sample size %.2f at period %zu", ess, t + 1);
      detail::fail(errc::particle_degeneracy, buf);
    }
    if (ess < 0.5 * static_cast<double>(n)) {
      // Systematic resampling.
      const double step = 1.0 / static_cast<double>(n);
      double u = rng.uniform() * step;
      double cum = w[0];
      std::size_t j = 0;
      for (std::size_t i = 0; i < n; ++i) {
        while (u > cum && j + 1 < n) cum += w[++j];
        scratch[i] = r[j];
        eve_scratch[i] = eve[j];
        u += step;
      }
      r.swap(scratch);
      eve.swap(eve_scratch);
      std::fill(logw.begin(), logw.end(), 0.0);
      std::fill(w.begin(), w.end(), step);
      ++out.resamples;
    }
  }

  const double lam_next = lambdas[T];
  double est = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    r[i] = lam_next * state.transition(rng, r[i]);
    est += w[i] * r[i];
  }
  std::fill(scratch.begin(), scratch.end(), 0.0);
  for (std::size_t i = 0; i < n; ++i) scratch[eve[i]] += w[i] * (r[i] - est);
  double var = 0.0;
  for (double g : scratch) var += g * g;
  out.premium = est;
  out.std_error = std::sqrt(var);
  return out;
}

// ---------------------------------------------------------------------------
// Method-of-moments estimates of (sigma2, rho) from fitted lambdas.

struct MomentEstimates {
  double sigma2_hat = 0.0;
  double rho_hat = 0.0;
  double psi_hat = 1.0;  // dispersion of the family (taken as known)
  std::size_t n_used = 0;
  double sigma2_se = 0.0;
  double rho_se = 0.0;
  bool sigma2_clamped = false;
  bool rho_clamped = false;
  std::vector<std::string> warnings;
};

inline constexpr double rho_hat_max = 0.999;

namespace detail {

/// The family's conditional-variance contribution psi E[V(lambda R)] splits
/// into a part free of sigma2 (subtracted from the numerator) and a part
/// proportional to sigma2 (added to the denominator).
struct VarianceCorrection {
  double offset;  // psi * lambda (Poisson) or psi * lambda^2 (gamma)
  double slope;   // 0 (Poisson) or psi * lambda^2 (gamma)
};

inline VarianceCorrection variance_correction(const EdFamily& f, double lambda) {
  if (f.kind() == EdKind::poisson) return {lambda, 0.0};
  return {f.psi() * lambda * lambda, f.psi() * lambda * lambda};
}

}  // namespace detail

/// sigma2_hat = sum[(y - l)^2 - offset] / sum[l^2 + slope] and
/// rho_hat = sum (y_t - l_t)(y_{t+1} - l_{t+1}) / (sigma2_hat sum l_t l_{t+1}),
/// summed over all policies and periods; standard errors by linearizing the
/// ratios over policies.
inline MomentEstimates estimate_moments(std::span<const PolicyHistory> policies, const EdFamily& family) {
  MomentEstimates est;
  est.psi_hat = family.psi();
  const std::size_t n = policies.size();
  std::vector<double> a(n, 0.0), b(n, 0.0), c(n, 0.0), l(n, 0.0);
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& h = policies[i];
    for (std::size_t t = 0; t < h.periods(); ++t) {
      const double res = h.y[t] - h.lambda[t];
      const auto vc = detail::variance_correction(family, h.lambda[t]);
      a[i] += res * res - vc.offset;
      b[i] += h.lambda[t] * h.lambda[t] + vc.slope;
      ++est.n_used;
      if (t + 1 < h.periods()) {
        c[i] += res * (h.y[t + 1] - h.lambda[t + 1]);
        l[i] += h.lambda[t] * h.lambda[t + 1];
        ++pairs;
      }
    }
  }
  double A = 0, B = 0, C = 0, L = 0;
  for (std::size_t i = 0; i < n; ++i) {
    A += a[i];
    B += b[i];
    C += c[i];
    L += l[i];
  }
  if (pairs == 0) detail::fail(errc::degenerate_denominator, "no consecutive periods: rho cannot be estimated");
  if (!(B > 0.0) || !(L > 0.0)) detail::fail(errc::degenerate_denominator, "moment denominators vanish");

  const double finite_pop = n > 1 ? static_cast<double>(n) / static_cast<double>(n - 1) : 1.0;
  const double s2 = A / B;
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) ss += (a[i] - s2 * b[i]) * (a[i] - s2 * b[i]);
  est.sigma2_se = std::sqrt(finite_pop * ss) / B;

  if (s2 < 0.0) {
    est.sigma2_hat = 0.0;
    est.sigma2_clamped = true;
    est.warnings.push_back("sigma2_hat negative (" + detail::fmt_num(s2) + "), clamped to 0");
  } else {
    est.sigma2_hat = s2;
  }

  if (est.sigma2_hat == 0.0) {
    est.rho_hat = 0.0;
    est.rho_clamped = true;
    est.warnings.push_back("rho_hat undefined with sigma2_hat = 0, set to 0");
    return est;
  }
  const double rho = C / (s2 * L);
  double sr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = rho * (c[i] / C - l[i] / L - (a[i] - s2 * b[i]) / A);
    sr += e * e;
  }
  est.rho_se = C != 0.0 ? std::sqrt(finite_pop * sr) : 0.0;
  if (rho < 0.0 || rho > rho_hat_max) {
    est.rho_hat = std::clamp(rho, 0.0, rho_hat_max);
    est.rho_clamped = true;
    est.warnings.push_back("rho_hat " + detail::fmt_num(rho) + " clamped to " + detail::fmt_num(est.rho_hat));
  } else {
    est.rho_hat = rho;
  }
  return est;
}

/// sigma2 of the time-invariant random effect, pooling every pair of periods:
/// sum_{s,t} [(y_s - l_s)(y_t - l_t) - [s=t] offset_t] / sum_{s,t} [l_s l_t + [s=t] slope_t],
/// clamped at 0.
inline double estimate_static_sigma2(std::span<const PolicyHistory> policies, const EdFamily& family) {
  double num = 0.0, den = 0.0;
  for (const auto& h : policies) {
    double sr = 0.0, sl = 0.0;
    for (std::size_t t = 0; t < h.periods(); ++t) {
      const auto vc = detail::variance_correction(family, h.lambda[t]);
      sr += h.y[t] - h.lambda[t];
      sl += h.lambda[t];
      num -= vc.offset;
      den += vc.slope;
    }
    num += sr * sr;
    den += sl * sl;
  }
  if (!(den > 0.0)) detail::fail(errc::degenerate_denominator, "static sigma2 denominator vanishes");
  return std::max(0.0, num / den);
}

// ---------------------------------------------------------------------------
// Out-of-sample evaluation. The last period of every policy is the holdout.

enum class LambdaSource { glm, panel };
enum class StaticSigmaSource { reestimate, dynamic };

struct EvaluateOptions {
  std::vector<Method> methods{Method::naive, Method::static_re, Method::proposed, Method::true_premium};
  EdFamily family = EdFamily::poisson();
  LambdaSource lambda_source = LambdaSource::glm;
  StaticSigmaSource static_sigma = StaticSigmaSource::reestimate;
  StateFamily smc_state = StateFamily::bgar1;
  std::size_t n_particles = 2000;
  std::size_t n_holdout_copies = 100;
  std::uint64_t seed = 1;
  std::optional<double> harvey_a0;     // default 1 / sigma2_hat
  std::optional<double> harvey_alpha;  // default rho_hat clamped to [0.01, 1]
};

struct PremiumRow {
  std::string policy_id;
  Method method;
  double predicted;
};

struct MethodSummary {
  Method method;
  double rmse = 0.0;
  double mae = 0.0;
  std::optional<double> relative_rmse_pct;
  std::optional<double> relative_mae_pct;
};

struct PremiumReport {
  std::vector<PremiumRow> rows;        // sorted by (policy_id, method)
  std::vector<MethodSummary> summary;  // in Method order
  MomentEstimates moments;
  double static_sigma2 = 0.0;
  std::optional<glm::GlmFit> glm_fit;
  bool has_truth = false;
  std::vector<std::string> warnings;

  const MethodSummary* find(Method m) const {
    for (const auto& s : summary)
      if (s.method == m) return &s;
    return nullptr;
  }
};

namespace detail {

inline std::uint64_t smc_stream_master(std::uint64_t seed) { return splitmix64(seed ^ 0xA5A5A5A55A5A5A5AULL); }

/// lambda_hat for every period, from a Poisson GLM fitted on training periods.
inline glm::GlmFit refit_lambdas(std::vector<PolicyHistory>& policies, std::size_t n_cov) {
  glm::Design x;
  std::vector<double> y;
  std::vector<double> row(n_cov + 1, 1.0);
  for (const auto& h : policies) {
    for (std::size_t t = 0; t + 1 < h.periods(); ++t) {
      require(h.covariates[t].size() == n_cov, errc::dimension_mismatch, "covariate count differs between records");
      std::copy(h.covariates[t].begin(), h.covariates[t].end(), row.begin() + 1);
      x.push_row(row);
      y.push_back(h.y[t]);
    }
  }
  glm::GlmFit fit = glm::fit_poisson(x, y);
  for (auto& h : policies) {
    for (std::size_t t = 0; t < h.periods(); ++t) {
      std::copy(h.covariates[t].begin(), h.covariates[t].end(), row.begin() + 1);
      h.lambda[t] = glm::predict_lambda(fit, row);
    }
  }
  return fit;
}

inline PolicyHistory training_part(const PolicyHistory& h) {
  PolicyHistory out = h;
  out.y.pop_back();
  out.lambda.pop_back();
  out.covariates.pop_back();
  out.true_r.pop_back();
  return out;
}

}  // namespace detail

inline PremiumReport evaluate(const ClaimPanel& panel, const EvaluateOptions& opt) {
  detail::require(!opt.methods.empty(), errc::invalid_config, "no methods requested");
  detail::require(opt.n_holdout_copies >= 1, errc::invalid_params, "n_holdout_copies must be >= 1");

  const std::vector<PolicyHistory> observed = group_by_policy(panel);
  detail::require(!observed.empty(), errc::invalid_params, "panel is empty");
  for (const auto& h : observed)
    detail::require(h.periods() >= 2, errc::invalid_params, "each policy needs training periods plus a holdout");

  PremiumReport report;
  report.has_truth = std::all_of(observed.begin(), observed.end(),
                                 [](const PolicyHistory& h) { return h.true_r.back().has_value(); });

  std::vector<PolicyHistory> fitted = observed;
  if (opt.lambda_source == LambdaSource::glm) {
    report.glm_fit = detail::refit_lambdas(fitted, panel.n_covariates);
    for (const auto& w : report.glm_fit->warnings) report.warnings.push_back("glm: " + w);
  }

  std::vector<PolicyHistory> training;
  training.reserve(fitted.size());
  for (const auto& h : fitted) training.push_back(detail::training_part(h));
  report.moments = estimate_moments(training, opt.family);
  for (const auto& w : report.moments.warnings) report.warnings.push_back("moments: " + w);
  const double s2 = report.moments.sigma2_hat;
  const double rho = report.moments.rho_hat;
  report.static_sigma2 =
      opt.static_sigma == StaticSigmaSource::reestimate ? estimate_static_sigma2(training, opt.family) : s2;

  std::vector<Method> methods;
  for (Method m : all_methods)
    if (std::find(opt.methods.begin(), opt.methods.end(), m) != opt.methods.end()) methods.push_back(m);
  const bool wants_true = std::find(methods.begin(), methods.end(), Method::true_premium) != methods.end();
  if (wants_true && !report.has_truth) {
    report.warnings.push_back("panel carries no true_r: TRUE premium skipped, holdout uses observed claims");
    methods.erase(std::find(methods.begin(), methods.end(), Method::true_premium));
  }
  // TRUE is always scored when truth is available so relative metrics exist.
  std::vector<Method> scored = methods;
  if (report.has_truth && !wants_true) scored.push_back(Method::true_premium);

  const double harvey_alpha = opt.harvey_alpha.value_or(std::clamp(rho, 0.01, 1.0));
  // a0 <= 0 marks "no prior weight available" (sigma2_hat = 0).
  const double harvey_a0 = opt.harvey_a0 ? *opt.harvey_a0 : (s2 > 0.0 ? 1.0 / s2 : 0.0);
  const StateSpec smc_state{opt.smc_state, s2, rho};

  std::vector<double> sq(scored.size(), 0.0), ab(scored.size(), 0.0);
  std::size_t n_obs = 0;
  std::size_t negatives = 0;
  std::vector<double> holdout;

  for (std::size_t i = 0; i < fitted.size(); ++i) {
    const auto& h = fitted[i];
    const std::size_t T = h.periods() - 1;
    const std::span<const double> y(h.y.data(), T);
    const std::span<const double> lam(h.lambda.data(), T);
    const double lam_next = h.lambda[T];

    holdout.clear();
    if (report.has_truth) {
      Rng rng = Rng::stream(opt.seed, i);
      const double mean = *h.true_r[T] * observed[i].lambda[T];
      for (std::size_t k = 0; k < opt.n_holdout_copies; ++k) holdout.push_back(opt.family.sample(rng, mean));
    } else {
      holdout.push_back(h.y[T]);
    }

    for (std::size_t m = 0; m < scored.size(); ++m) {
      double pred = lam_next;
      switch (scored[m]) {
        case Method::naive: pred = naive_premium(lam_next); break;
        case Method::static_re:
          if (report.static_sigma2 > 0.0) pred = static_premium(y, lam, report.static_sigma2, lam_next);
          break;
        case Method::proposed:
          if (s2 > 0.0) {
            CovModel model{DynamicAr1{s2, rho, opt.family, std::nullopt}, h.lambda};
            pred = proposed_premium(y, credibility_factors(model, T));
          }
          break;
        case Method::exact_smc:
          if (s2 > 0.0)
            pred = exact_premium_smc(y, h.lambda, smc_state, opt.family, opt.n_particles,
                                     Rng::stream(detail::smc_stream_master(opt.seed), i).next_u64())
                       .premium;
          break;
        case Method::true_premium: pred = true_premium(h.true_r[T], lam_next); break;
        case Method::harvey:
          if (harvey_a0 > 0.0) pred = harvey_fernandez_predict(y, lam, lam_next, harvey_a0, harvey_alpha);
          break;
      }
      if (pred < 0.0) ++negatives;
      if (std::find(methods.begin(), methods.end(), scored[m]) != methods.end())
        report.rows.push_back({h.policy_id, scored[m], pred});
      for (double v : holdout) {
        sq[m] += (v - pred) * (v - pred);
        ab[m] += std::abs(v - pred);
      }
    }
    n_obs += holdout.size();
  }
  if (negatives > 0)
    report.warnings.push_back(std::to_string(negatives) + " negative premium(s) reported unclipped");
  if (s2 == 0.0)
    report.warnings.push_back("sigma2_hat = 0: PROPOSED, EXACT_SMC and HARVEY fall back to the naive premium");
  if (report.static_sigma2 == 0.0 &&
      std::find(methods.begin(), methods.end(), Method::static_re) != methods.end())
    report.warnings.push_back("static sigma2 = 0: STATIC falls back to the naive premium");

  std::stable_sort(report.rows.begin(), report.rows.end(), [](const PremiumRow& a, const PremiumRow& b) {
    if (a.policy_id != b.policy_id) return a.policy_id < b.policy_id;
    return static_cast<int>(a.method) < static_cast<int>(b.method);
  });

  std::optional<std::pair<double, double>> truth_metrics;
  std::vector<MethodSummary> all;
  for (std::size_t m = 0; m < scored.size(); ++m) {
    MethodSummary s{scored[m], std::sqrt(sq[m] / static_cast<double>(n_obs)), ab[m] / static_cast<double>(n_obs),
                    std::nullopt, std::nullopt};
    if (scored[m] == Method::true_premium) truth_metrics = {s.rmse, s.mae};
    all.push_back(s);
  }
  for (auto& s : all) {
    if (truth_metrics) {
      s.relative_rmse_pct = 100.0 * (s.rmse / truth_metrics->first);
      s.relative_mae_pct = 100.0 * (s.mae / truth_metrics->second);
    }
    if (std::find(methods.begin(), methods.end(), s.method) != methods.end()) report.summary.push_back(s);
  }
  std::sort(report.summary.begin(), report.summary.end(),
            [](const MethodSummary& a, const MethodSummary& b) { return a.method < b.method; });
  return report;
}

}  // namespace dyncred
