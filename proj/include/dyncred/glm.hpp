#pragma once

// Poisson regression with log link, fitted by iteratively reweighted least
// squares with step-halving. Supplies the a-priori means lambda_it.

#include <cmath>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dyncred/error.hpp"
#include "dyncred/linalg.hpp"

namespace dyncred::glm {

using linalg::SymMatrix;
using linalg::Vector;

/// Dense row-major n x k design matrix.
class Design {
 public:
  Design() = default;
  Design(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

  std::span<const double> row(std::size_t i) const noexcept { return {data_.data() + i * cols_, cols_}; }

  void push_row(std::span<const double> values) {
    if (rows_ == 0 && cols_ == 0) cols_ = values.size();
    detail::require(values.size() == cols_, errc::dimension_mismatch, "design row has the wrong length");
    data_.insert(data_.end(), values.begin(), values.end());
    ++rows_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct GlmFit {
  Vector beta;
  Vector std_err;
  Vector p_values;
  bool converged = false;
  int iterations = 0;
  double log_likelihood = 0.0;
  double deviance = 0.0;
  std::vector<std::string> warnings;
};

struct IrlsOptions {
  int max_iterations = 50;
  int max_halvings = 10;
  double deviance_tolerance = 1e-10;
  double large_beta = 30.0;
};

namespace detail {

using dyncred::detail::fail;
using dyncred::detail::require;

inline constexpr double max_eta = 700.0;

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline Vector linear_predictor(const Design& x, std::span<const double> beta, std::span<const double> offset) {
  Vector eta(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    eta[i] = dot(x.row(i), beta) + (offset.empty() ? 0.0 : offset[i]);
    if (eta[i] > max_eta) eta[i] = max_eta;
  }
  return eta;
}

inline double deviance(std::span<const double> y, std::span<const double> mu) {
  double d = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) d += (y[i] > 0.0 ? y[i] * std::log(y[i] / mu[i]) : 0.0) - (y[i] - mu[i]);
  return 2.0 * d;
}

inline double log_likelihood(std::span<const double> y, std::span<const double> mu) {
  double l = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i)
    l += (y[i] > 0.0 ? y[i] * std::log(mu[i]) : 0.0) - mu[i] - std::lgamma(y[i] + 1.0);
  return l;
}

/// X^T W X and X^T W z.
inline std::pair<SymMatrix, Vector> weighted_normal_equations(const Design& x, std::span<const double> w,
                                                              std::span<const double> z) {
  const std::size_t k = x.cols();
  SymMatrix xtwx(k);
  Vector xtwz(k, 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto r = x.row(i);
    for (std::size_t a = 0; a < k; ++a) {
      const double wa = w[i] * r[a];
      xtwz[a] += wa * z[i];
      for (std::size_t b = a; b < k; ++b) xtwx.set(a, b, xtwx(a, b) + wa * r[b]);
    }
  }
  return {std::move(xtwx), std::move(xtwz)};
}

inline linalg::LdltFactor factor_or_rank_deficient(const SymMatrix& m) {
  try {
    return linalg::LdltFactor(m);
  } catch (const error& e) {
    if (e.code() == errc::not_positive_definite)
      fail(errc::rank_deficient, "design is not of full column rank (weighted normal equations singular)");
    throw;
  }
}

}  // namespace detail

/// Maximizes the Poisson log-likelihood with mean exp(X beta + offset).
/// `offset` may be empty. Returns converged = false after max_iterations.
inline GlmFit fit_poisson(const Design& x, std::span<const double> y, std::span<const double> offset = {},
                          const IrlsOptions& opt = {}) {
  const std::size_t n = x.rows();
  const std::size_t k = x.cols();
  detail::require(k >= 1, errc::dimension_mismatch, "design needs at least one column");
  detail::require(y.size() == n, errc::dimension_mismatch, "y length differs from design rows");
  detail::require(offset.empty() || offset.size() == n, errc::dimension_mismatch, "offset length differs");
  detail::require(n > k, errc::invalid_params, "need more rows than columns");
  for (double v : y)
    detail::require(v >= 0.0 && std::isfinite(v) && v == std::floor(v), errc::invalid_params,
                    "Poisson responses must be non-negative integers");

  auto off = [&](std::size_t i) { return offset.empty() ? 0.0 : offset[i]; };
  {
    const Vector ones(n, 1.0);
    detail::factor_or_rank_deficient(detail::weighted_normal_equations(x, ones, ones).first);
  }

  // Start from mu = y + 0.1, i.e. one weighted least-squares step on log(y + 0.1).
  Vector w(n), z(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double mu = y[i] + 0.1;
    w[i] = mu;
    z[i] = std::log(mu) - off(i);
  }
  GlmFit fit;
  {
    auto [xtwx, xtwz] = detail::weighted_normal_equations(x, w, z);
    fit.beta = detail::factor_or_rank_deficient(xtwx).solve(xtwz);
  }

  Vector eta = detail::linear_predictor(x, fit.beta, offset);
  Vector mu(n);
  for (std::size_t i = 0; i < n; ++i) mu[i] = std::exp(eta[i]);
  double dev = detail::deviance(y, mu);

  for (fit.iterations = 1; fit.iterations <= opt.max_iterations; ++fit.iterations) {
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = mu[i];
      z[i] = eta[i] - off(i) + (y[i] - mu[i]) / mu[i];
    }
    auto [xtwx, xtwz] = detail::weighted_normal_equations(x, w, z);
    std::optional<linalg::LdltFactor> step;
    try {
      step.emplace(xtwx);
    } catch (const error& e) {
      if (e.code() != errc::not_positive_definite) throw;
      // X has full rank, so the weights mu have underflowed: fitted means run to 0.
      fit.warnings.push_back("IRLS weights vanished at iteration " + std::to_string(fit.iterations) +
                             "; possible separation");
      break;
    }
    Vector proposal = step->solve(xtwz);

    Vector new_eta, new_mu(n);
    double new_dev = 0.0;
    for (int h = 0;; ++h) {
      new_eta = detail::linear_predictor(x, proposal, offset);
      for (std::size_t i = 0; i < n; ++i) new_mu[i] = std::exp(new_eta[i]);
      new_dev = detail::deviance(y, new_mu);
      if ((std::isfinite(new_dev) && new_dev <= dev) || h == opt.max_halvings) break;
      for (std::size_t j = 0; j < k; ++j) proposal[j] = 0.5 * (proposal[j] + fit.beta[j]);
    }
    const double change = std::abs(dev - new_dev) / (std::abs(new_dev) + 0.1);
    if (!(new_dev <= dev)) {
      // Halving exhausted; at the optimum this is rounding noise.
      fit.converged = std::isfinite(new_dev) && change < opt.deviance_tolerance;
      break;
    }
    fit.beta = std::move(proposal);
    eta = std::move(new_eta);
    mu = new_mu;
    dev = new_dev;
    if (change < opt.deviance_tolerance) {
      fit.converged = true;
      break;
    }
  }
  if (fit.iterations > opt.max_iterations) fit.iterations = opt.max_iterations;
  if (!fit.converged) fit.warnings.push_back("IRLS did not converge within " + std::to_string(fit.iterations) + " iterations");

  // Standard errors from the inverse Fisher information at the estimate.
  auto [info, unused] = detail::weighted_normal_equations(x, mu, mu);
  const SymMatrix cov = [&] {
    try {
      return linalg::inverse_spd(info);
    } catch (const error& e) {
      if (e.code() != errc::not_positive_definite) throw;
      fit.warnings.push_back("information matrix singular at the estimate; standard errors set to infinity");
      SymMatrix inf_cov(k);
      for (std::size_t j = 0; j < k; ++j) inf_cov.set(j, j, INFINITY);
      return inf_cov;
    }
  }();
  fit.std_err.resize(k);
  fit.p_values.resize(k);
  for (std::size_t j = 0; j < k; ++j) {
    fit.std_err[j] = std::sqrt(cov(j, j));
    const double zstat = fit.beta[j] / fit.std_err[j];
    fit.p_values[j] = std::erfc(std::abs(zstat) / std::sqrt(2.0));
    if (std::abs(fit.beta[j]) > opt.large_beta) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "|beta_%zu| = %.3g exceeds %.0f; possible separation", j, fit.beta[j],
                    opt.large_beta);
      fit.warnings.emplace_back(buf);
    }
  }
  fit.deviance = dev;
  fit.log_likelihood = detail::log_likelihood(y, mu);
  return fit;
}

inline double predict_lambda(const GlmFit& fit, std::span<const double> design_row, double offset = 0.0) {
  detail::require(design_row.size() == fit.beta.size(), errc::dimension_mismatch,
                  "design row length differs from the number of coefficients");
  return std::exp(detail::dot(design_row, fit.beta) + offset);
}

/// Estimate / Std. err / p-value table, one row per coefficient.
inline std::string coefficient_table(const GlmFit& fit, const std::vector<std::string>& names) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-12s %12s %12s %10s\n", "", "Estimate", "Std. err", "p-value");
  out += buf;
  for (std::size_t j = 0; j < fit.beta.size(); ++j) {
    const std::string name = j < names.size() ? names[j] : "b" + std::to_string(j);
    std::snprintf(buf, sizeof buf, "%-12s %12.4f %12.4f %10.4f\n", name.c_str(), fit.beta[j], fit.std_err[j],
                  fit.p_values[j]);
    out += buf;
  }
  return out;
}

}  // namespace dyncred::glm
