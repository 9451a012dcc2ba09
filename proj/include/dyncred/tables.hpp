#pragma once

// The published numeric factor tables, regenerated from the models. Values
// are kept raw; `unit` and `decimals` describe how they are printed.

#include <array>
#include <cstdio>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dyncred/credibility.hpp"
#include "dyncred/error.hpp"

namespace dyncred::tables {

inline constexpr std::array<std::string_view, 6> table_ids = {"two-component", "poisson-std",    "poisson-nonstd",
                                                              "gamma-both",    "semiparametric", "arma-remark"};

struct TableRow {
  std::vector<std::string> labels;
  Vector values;
  std::string verdict;
};

struct GoldenTable {
  std::string id;
  std::vector<std::string> label_columns;
  std::vector<std::string> value_columns;
  std::string verdict_column;  // empty if none
  double unit = 1.0;
  int decimals = 3;
  std::vector<TableRow> rows;
};

inline const Vector lambdas_flat{1, 1, 1, 1, 1, 1};
inline const Vector lambdas_up{0.001, 0.01, 0.1, 1, 10, 1};
inline const Vector lambdas_down{10, 1, 0.1, 0.01, 0.001, 1};
inline const Vector semiparametric_acf{0.733, 0.524, 0.504, 0.483, 0.401};

namespace detail {

inline std::string lambda_label(const Vector& lam) {
  std::string s;
  for (std::size_t t = 0; t + 1 < lam.size(); ++t) {
    if (t) s += ' ';
    s += dyncred::detail::fmt_num(lam[t]);
  }
  return s;
}

inline std::string yes_no(bool b) { return b ? "yes" : "no"; }

inline std::vector<std::string> numbered(const char* stem, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t t = 1; t <= n; ++t) out.push_back(stem + std::to_string(t));
  return out;
}

struct Case {
  const char* label;
  double rho;
  const Vector* lambdas;
};

inline constexpr double table_sigma2 = 0.5;

inline std::vector<Case> poisson_cases() {
  return {{"Case 1.a", 0.3, &lambdas_flat}, {"Case 1.b", 0.3, &lambdas_up}, {"Case 1.c", 0.3, &lambdas_down},
          {"Case 2.a", 0.6, &lambdas_flat}, {"Case 2.b", 0.6, &lambdas_up}, {"Case 2.c", 0.6, &lambdas_down}};
}

inline GoldenTable poisson_table(bool standardized) {
  GoldenTable g;
  g.id = standardized ? "poisson-std" : "poisson-nonstd";
  g.label_columns = {"case", "rho", "lambdas"};
  g.value_columns = numbered(standardized ? "alpha_star_" : "alpha_", 5);
  g.verdict_column = "isotonic_star";
  g.unit = 1e-3;
  for (const auto& c : poisson_cases()) {
    const CovModel m{DynamicAr1{table_sigma2, c.rho, EdFamily::poisson(), std::nullopt}, *c.lambdas};
    const CredibilityFactors f = closed_form_factors_model1(m, 5);
    g.rows.push_back({{c.label, dyncred::detail::fmt_num(c.rho), lambda_label(*c.lambdas)},
                      standardized ? f.alpha_star : f.alpha,
                      yes_no(f.isotonic_star)});
  }
  return g;
}

inline GoldenTable gamma_table() {
  GoldenTable g;
  g.id = "gamma-both";
  g.label_columns = {"case", "rho", "lambdas", "kind"};
  g.value_columns = numbered("a", 5);
  g.unit = 1e-3;
  const Case cases[] = {{"Case 1.a", 0.3, &lambdas_flat},
                        {"Case 1.b", 0.3, &lambdas_up},
                        {"Case 2.a", 0.3, &lambdas_flat},
                        {"Case 2.b", 0.3, &lambdas_up}};
  for (std::size_t k = 0; k < 4; ++k) {
    const auto& c = cases[k];
    const bool standardized = k >= 2;
    const CovModel m{DynamicAr1{table_sigma2, c.rho, EdFamily::gamma(0.5), std::nullopt}, *c.lambdas};
    const CredibilityFactors f = closed_form_factors_model1(m, 5);
    g.rows.push_back({{c.label, dyncred::detail::fmt_num(c.rho), lambda_label(*c.lambdas),
                       standardized ? "alpha_star" : "alpha"},
                      standardized ? f.alpha_star : f.alpha,
                      {}});
  }
  return g;
}

}  // namespace detail

/// (psi, sigma2_sq) of the four two-component scenarios; sigma1^2 = 1,
/// rho = 0.8, lambda = 1, T = 5, identity variance function.
struct Scenario {
  const char* label;
  double psi;
  double sigma2_sq;
};

inline constexpr std::array<Scenario, 4> two_component_scenarios = {
    Scenario{"I", 0.01, 1.0}, Scenario{"II", 0.1, 1.0}, Scenario{"III", 1.0, 1.0}, Scenario{"IV", 0.1, 0.01}};

inline CovModel two_component_model(const Scenario& s) {
  return CovModel{TwoComponent{1.0, s.sigma2_sq, 0.8, s.psi, VarianceFn::identity}, {}};
}

inline CovModel semiparametric_model() { return CovModel{ArbitraryAcf{1.0, semiparametric_acf, EdFamily::poisson()}, {}}; }

inline CovModel arma_remark_model() { return CovModel{Arma11{0.5, -0.2, 1.0}, {}}; }

inline GoldenTable make_table(std::string_view id) {
  if (id == "two-component") {
    GoldenTable g;
    g.id = std::string(id);
    g.label_columns = {"scenario", "psi", "sigma2_sq"};
    g.value_columns = detail::numbered("alpha_", 5);
    g.verdict_column = "monotone";
    for (const auto& s : two_component_scenarios) {
      const auto f = credibility_factors(two_component_model(s), 5);
      g.rows.push_back({{s.label, dyncred::detail::fmt_num(s.psi), dyncred::detail::fmt_num(s.sigma2_sq)},
                        f.alpha,
                        detail::yes_no(check_isotonic(f.alpha).isotonic)});
    }
    return g;
  }
  if (id == "poisson-std") return detail::poisson_table(true);
  if (id == "poisson-nonstd") return detail::poisson_table(false);
  if (id == "gamma-both") return detail::gamma_table();
  if (id == "semiparametric") {
    // Listed as printed: for each T, alpha_{k,T} from k = T down to 1.
    GoldenTable g;
    g.id = std::string(id);
    g.label_columns = {"T", "k"};
    g.value_columns = {"alpha_k_T"};
    g.verdict_column = "monotone";
    g.decimals = 2;
    for (std::size_t T = 3; T <= 5; ++T) {
      const auto f = credibility_factors(semiparametric_model(), T);
      const std::string verdict = detail::yes_no(check_isotonic(f.alpha).isotonic);
      for (std::size_t k = T; k >= 1; --k)
        g.rows.push_back({{std::to_string(T), std::to_string(k)}, {f.alpha[k - 1]}, verdict});
    }
    return g;
  }
  if (id == "arma-remark") {
    GoldenTable g;
    g.id = std::string(id);
    g.label_columns = {"phi", "theta", "sigma_e_sq"};
    g.value_columns = detail::numbered("alpha_", 5);
    g.verdict_column = "regular";
    const auto f = credibility_factors(arma_remark_model(), 5);
    g.rows.push_back({{"0.5", "-0.2", "1"}, f.alpha, detail::yes_no(f.regular)});
    return g;
  }
  dyncred::detail::fail(errc::unknown_table, "unknown table id '" + std::string(id) + "'");
}

inline std::string to_csv(const GoldenTable& g) {
  std::string out;
  auto cell = [&](const std::string& s, bool first) {
    if (!first) out += ',';
    out += s;
  };
  bool first = true;
  for (const auto& c : g.label_columns) cell(c, std::exchange(first, false));
  for (const auto& c : g.value_columns) cell(c, std::exchange(first, false));
  if (!g.verdict_column.empty()) cell(g.verdict_column, false);
  out += '\n';
  char buf[48];
  for (const auto& r : g.rows) {
    first = true;
    for (const auto& l : r.labels) cell(l, std::exchange(first, false));
    for (double v : r.values) {
      std::snprintf(buf, sizeof buf, "%.*f", g.decimals, v / g.unit);
      if (std::string_view(buf).find_first_not_of("-0.") == std::string_view::npos && buf[0] == '-')
        std::snprintf(buf, sizeof buf, "%.*f", g.decimals, 0.0);  // no "-0.000"
      cell(buf, std::exchange(first, false));
    }
    if (!g.verdict_column.empty()) cell(r.verdict, false);
    out += '\n';
  }
  return out;
}

}  // namespace dyncred::tables
