#pragma once

// Small dense symmetric linear algebra for covariance matrices of a few
// dozen periods at most: LDL^T solves, the AR(1) Toeplitz matrix and its
// tridiagonal inverse, the u/v recursion for the last column of a symmetric
// tridiagonal inverse, and Sherman-Morrison updates by the all-ones matrix.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <vector>

#include "dyncred/error.hpp"

namespace dyncred::linalg {

using Vector = std::vector<double>;

class SymMatrix {
 public:
  explicit SymMatrix(std::size_t dim) : dim_(dim), entries_(dim * dim, 0.0) {
    detail::require(dim >= 1, errc::invalid_params, "SymMatrix dimension must be >= 1");
  }

  SymMatrix(std::initializer_list<std::initializer_list<double>> rows)
      : SymMatrix(rows.size()) {
    std::size_t i = 0;
    for (const auto& row : rows) {
      detail::require(row.size() == dim_, errc::dimension_mismatch, "SymMatrix rows must be square");
      std::size_t j = 0;
      for (double v : row) entries_[i * dim_ + j++] = v;
      ++i;
    }
    for (std::size_t r = 0; r < dim_; ++r)
      for (std::size_t c = r + 1; c < dim_; ++c)
        detail::require(entries_[r * dim_ + c] == entries_[c * dim_ + r],
                        errc::invalid_params, "SymMatrix entries must be symmetric");
  }

  static SymMatrix identity(std::size_t dim) {
    SymMatrix m(dim);
    for (std::size_t i = 0; i < dim; ++i) m.set(i, i, 1.0);
    return m;
  }

  std::size_t dim() const noexcept { return dim_; }

  double operator()(std::size_t i, std::size_t j) const noexcept { return entries_[i * dim_ + j]; }

  /// Writes both (i,j) and (j,i).
  void set(std::size_t i, std::size_t j, double value) noexcept {
    entries_[i * dim_ + j] = value;
    entries_[j * dim_ + i] = value;
  }

  void add(std::size_t i, std::size_t j, double value) noexcept {
    entries_[i * dim_ + j] += value;
    if (i != j) entries_[j * dim_ + i] += value;
  }

  double max_abs_diagonal() const noexcept {
    double m = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) m = std::max(m, std::abs((*this)(i, i)));
    return m;
  }

  Vector multiply(std::span<const double> x) const {
    detail::require(x.size() == dim_, errc::dimension_mismatch, "SymMatrix::multiply size");
    Vector out(dim_, 0.0);
    for (std::size_t i = 0; i < dim_; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < dim_; ++j) s += entries_[i * dim_ + j] * x[j];
      out[i] = s;
    }
    return out;
  }

  std::span<const double> row_major() const noexcept { return entries_; }

 private:
  std::size_t dim_;
  std::vector<double> entries_;
};

inline constexpr double pd_relative_tolerance = 1e-12;

/// LDL^T factorization of a symmetric positive definite matrix. Every pivot
/// must exceed pd_relative_tolerance times the largest diagonal entry.
class LdltFactor {
 public:
  explicit LdltFactor(const SymMatrix& a) : n_(a.dim()), lower_(n_ * n_, 0.0), diag_(n_, 0.0) {
    const double tol = pd_relative_tolerance * a.max_abs_diagonal();
    for (std::size_t j = 0; j < n_; ++j) {
      double d = a(j, j);
      for (std::size_t k = 0; k < j; ++k) d -= lower_[j * n_ + k] * lower_[j * n_ + k] * diag_[k];
      if (!(d > tol)) {
        detail::fail(errc::not_positive_definite,
                     "pivot " + std::to_string(j) + " = " + std::to_string(d) +
                         " is below tolerance " + std::to_string(tol));
      }
      diag_[j] = d;
      lower_[j * n_ + j] = 1.0;
      for (std::size_t i = j + 1; i < n_; ++i) {
        double s = a(i, j);
        for (std::size_t k = 0; k < j; ++k) s -= lower_[i * n_ + k] * lower_[j * n_ + k] * diag_[k];
        lower_[i * n_ + j] = s / d;
      }
    }
  }

  std::size_t dim() const noexcept { return n_; }

  Vector solve(std::span<const double> b) const {
    detail::require(b.size() == n_, errc::dimension_mismatch, "solve: rhs length != matrix dimension");
    Vector x(b.begin(), b.end());
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t k = 0; k < i; ++k) x[i] -= lower_[i * n_ + k] * x[k];
    for (std::size_t i = 0; i < n_; ++i) x[i] /= diag_[i];
    for (std::size_t i = n_; i-- > 0;)
      for (std::size_t k = i + 1; k < n_; ++k) x[i] -= lower_[k * n_ + i] * x[k];
    return x;
  }

  std::span<const double> pivots() const noexcept { return diag_; }

 private:
  std::size_t n_;
  std::vector<double> lower_;
  std::vector<double> diag_;
};

inline Vector solve_spd(const SymMatrix& a, std::span<const double> b) {
  detail::require(b.size() == a.dim(), errc::dimension_mismatch, "solve_spd: rhs length != matrix dimension");
  return LdltFactor(a).solve(b);
}

inline SymMatrix inverse_spd(const SymMatrix& a) {
  const LdltFactor f(a);
  const std::size_t n = a.dim();
  std::vector<Vector> cols(n);
  Vector e(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    std::fill(e.begin(), e.end(), 0.0);
    e[j] = 1.0;
    cols[j] = f.solve(e);
  }
  SymMatrix inv(n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i <= j; ++i) inv.set(i, j, 0.5 * (cols[j][i] + cols[i][j]));
  return inv;
}

namespace detail {
inline void require_rho(double rho) {
  if (!(std::abs(rho) < 1.0)) dyncred::detail::fail(errc::invalid_rho, "|rho| must be < 1, got " + std::to_string(rho));
}
}  // namespace detail

/// [i][j] = rho^|i-j|
inline SymMatrix ar1_toeplitz(std::size_t dim, double rho) {
  detail::require_rho(rho);
  SymMatrix m(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    double p = 1.0;
    for (std::size_t j = i; j < dim; ++j) {
      m.set(i, j, p);
      p *= rho;
    }
  }
  return m;
}

/// Closed-form tridiagonal inverse of ar1_toeplitz(dim, rho).
inline SymMatrix ar1_toeplitz_inverse(std::size_t dim, double rho) {
  detail::require_rho(rho);
  dyncred::detail::require(dim >= 2, errc::invalid_params, "ar1_toeplitz_inverse needs dim >= 2");
  const double scale = 1.0 / (1.0 - rho * rho);
  SymMatrix m(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    const bool corner = (i == 0 || i == dim - 1);
    m.set(i, i, scale * (corner ? 1.0 : 1.0 + rho * rho));
    if (i + 1 < dim) m.set(i, i + 1, -scale * rho);
  }
  return m;
}

/// O(T) product ar1_toeplitz(T, rho)^{-1} * x using the tridiagonal pattern.
inline Vector ar1_toeplitz_inverse_apply(double rho, std::span<const double> x) {
  detail::require_rho(rho);
  const std::size_t n = x.size();
  dyncred::detail::require(n >= 1, errc::invalid_params, "empty vector");
  if (n == 1) return {x[0]};
  const double scale = 1.0 / (1.0 - rho * rho);
  Vector out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool corner = (i == 0 || i == n - 1);
    double s = (corner ? 1.0 : 1.0 + rho * rho) * x[i];
    if (i > 0) s -= rho * x[i - 1];
    if (i + 1 < n) s -= rho * x[i + 1];
    out[i] = scale * s;
  }
  return out;
}

struct UvSequences {
  Vector d;
  Vector delta;
  Vector u;
  Vector v;
  double rho = 0.0;
  Vector xi;

  /// Last column of the inverse of the tridiagonal matrix, v_T * (u_1..u_T).
  /// Built from delta directly so it stays finite at rho = 0, where u is not.
  Vector last_column() const {
    const std::size_t n = delta.size();
    Vector out(n);
    out[n - 1] = 1.0 / delta[n - 1];
    for (std::size_t t = n - 1; t-- > 0;) out[t] = rho / delta[t] * out[t + 1];
    return out;
  }
};

/// Symmetric tridiagonal matrix with diagonal (1+xi_1, 1+rho^2+xi_2, ...,
/// 1+rho^2+xi_{T-1}, 1+xi_T) and off-diagonal -rho, i.e.
/// (1-rho^2) * ar1_toeplitz_inverse + diag(xi).
inline SymMatrix tridiag_shifted_ar1(std::span<const double> xi, double rho) {
  const std::size_t n = xi.size();
  dyncred::detail::require(n >= 2, errc::invalid_params, "tridiagonal system needs T >= 2");
  SymMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool corner = (i == 0 || i == n - 1);
    m.set(i, i, (corner ? 1.0 : 1.0 + rho * rho) + xi[i]);
    if (i + 1 < n) m.set(i, i + 1, -rho);
  }
  return m;
}

/// Backward d / forward delta elimination sequences and the u, v vectors
/// whose outer pattern u_min(i,j) v_max(i,j) gives the inverse of
/// tridiag_shifted_ar1(xi, rho).
inline UvSequences tridiag_uv(std::span<const double> xi, double rho) {
  detail::require_rho(rho);
  const std::size_t n = xi.size();
  dyncred::detail::require(n >= 2, errc::invalid_params, "tridiag_uv needs T >= 2");
  for (double x : xi)
    dyncred::detail::require(x > 0.0 && std::isfinite(x), errc::invalid_params, "tridiag_uv needs xi > 0");

  const double r2 = rho * rho;
  UvSequences s;
  s.rho = rho;
  s.xi.assign(xi.begin(), xi.end());
  s.d.assign(n, 0.0);
  s.delta.assign(n, 0.0);
  s.u.assign(n, 0.0);
  s.v.assign(n, 0.0);

  s.d[n - 1] = 1.0 + xi[n - 1];
  for (std::size_t t = n - 1; t-- > 1;) s.d[t] = 1.0 + r2 + xi[t] - r2 / s.d[t + 1];
  s.d[0] = 1.0 + xi[0] - r2 / s.d[1];

  s.v[0] = 1.0 / s.d[0];
  for (std::size_t t = 1; t < n; ++t) s.v[t] = rho / s.d[t] * s.v[t - 1];

  s.delta[0] = 1.0 + xi[0];
  for (std::size_t t = 1; t + 1 < n; ++t) s.delta[t] = 1.0 + r2 + xi[t] - r2 / s.delta[t - 1];
  s.delta[n - 1] = 1.0 + xi[n - 1] - r2 / s.delta[n - 2];

  // u is only defined up to the factor 1 / v_T, which is infinite at rho = 0.
  s.u[n - 1] = rho == 0.0 ? INFINITY : 1.0 / (s.delta[n - 1] * s.v[n - 1]);
  for (std::size_t t = n - 1; t-- > 0;) s.u[t] = rho / s.delta[t] * s.u[t + 1];
  return s;
}

template <typename F>
concept InverseApplier = requires(const F& f, std::span<const double> v) {
  { f(v) } -> std::convertible_to<Vector>;
};

inline constexpr double singular_update_tolerance = 1e-14;

/// (M + c E)^{-1} rhs where E is the all-ones matrix and `apply_base_inverse`
/// computes M^{-1} v.
template <InverseApplier F>
Vector rank_one_update_solve(const F& apply_base_inverse, double c, std::span<const double> rhs) {
  const std::size_t n = rhs.size();
  const Vector ones(n, 1.0);
  Vector base_rhs = apply_base_inverse(std::span<const double>(rhs));
  const Vector base_ones = apply_base_inverse(std::span<const double>(ones));
  dyncred::detail::require(base_rhs.size() == n && base_ones.size() == n, errc::dimension_mismatch,
                           "inverse applier returned wrong length");
  const double sum_ones = std::accumulate(base_ones.begin(), base_ones.end(), 0.0);
  const double sum_rhs = std::accumulate(base_rhs.begin(), base_rhs.end(), 0.0);
  const double denom = 1.0 + c * sum_ones;
  if (std::abs(denom) < singular_update_tolerance)
    dyncred::detail::fail(errc::singular_update, "1 + c 1'M^{-1}1 vanishes");
  const double k = c * sum_rhs / denom;
  for (std::size_t i = 0; i < n; ++i) base_rhs[i] -= k * base_ones[i];
  return base_rhs;
}

inline double norm_inf(std::span<const double> x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace dyncred::linalg
