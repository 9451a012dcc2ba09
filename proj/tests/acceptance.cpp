// Acceptance suite: one PASS/FAIL line per criterion. Tolerances and runtime
// budgets are pinned below; exit status is nonzero if any criterion fails
// that is not listed with --known-failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "dyncred/dyncred.hpp"
#include "golden.hpp"
#include "moment_checks.hpp"
#include "oracle.hpp"

using namespace dyncred;

namespace {

constexpr double factor_tol = 5e-4;       // per printed entry, in printed units
constexpr double semi_tol = 5e-3;         // two-decimal table
constexpr double oracle_tol = 1e-10;      // closed form vs normal equations
constexpr double mc_sigmas = 3.0;         // Monte Carlo agreement
constexpr double sim_points = 2.0;        // relative-RMSE slack, percentage points
constexpr double glm_tol = 1e-8;
constexpr int sim_seeds = 5;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (detail.size() < 400) detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

std::string num(double x, int prec = 6) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*g", prec, x);
  return buf;
}

template <std::size_t N>
void compare_row(Outcome& o, const std::string& label, const Vector& got, const std::array<double, N>& want,
                 double unit, double tol) {
  if (got.size() != N) {
    o.require(false, label + ": length " + std::to_string(got.size()));
    return;
  }
  for (std::size_t t = 0; t < N; ++t) {
    const double v = got[t] / unit;
    o.require(std::abs(v - want[t]) <= tol,
              label + "[" + std::to_string(t + 1) + "] = " + num(v) + " vs " + num(want[t]));
  }
}

// ---------------------------------------------------------------------------

Outcome two_component() {
  Outcome o;
  for (std::size_t k = 0; k < 4; ++k) {
    const auto& row = golden::two_component[k];
    const auto& sc = tables::two_component_scenarios[k];
    o.require(sc.psi == row.psi && sc.sigma2_sq == row.sigma2_sq, "scenario parameters");
    const auto f = credibility_factors(tables::two_component_model(sc), 5);
    compare_row(o, std::string("scenario ") + sc.label, f.alpha, row.alpha, 1.0, factor_tol);
    o.require(check_isotonic(f.alpha).isotonic == row.monotone, std::string("verdict ") + sc.label);
  }
  o.detail = o.pass ? "4 scenario rows and verdicts" : o.detail;
  return o;
}

Outcome semiparametric() {
  Outcome o;
  auto run = [&](std::size_t T, auto printed) {
    const auto f = credibility_factors(tables::semiparametric_model(), T);
    Vector listed(T);
    for (std::size_t k = 0; k < T; ++k) listed[k] = f.alpha[T - 1 - k];
    compare_row(o, "T=" + std::to_string(T), listed, printed, 1.0, semi_tol);
    o.require(!check_isotonic(f.alpha).isotonic, "T=" + std::to_string(T) + " monotone");
  };
  run(3, golden::semi_t3);
  run(4, golden::semi_t4);
  run(5, golden::semi_t5);
  o.detail = o.pass ? "T=3,4,5 listed most recent first; none monotone" : o.detail;
  return o;
}

Outcome arma() {
  Outcome o;
  const auto f = credibility_factors(tables::arma_remark_model(), 5);
  compare_row(o, "alpha", f.alpha, golden::arma, 1.0, factor_tol);
  o.require(!f.regular, "regular flag");
  o.detail = o.pass ? "factors match; regular = false" : o.detail;
  return o;
}

Outcome factor_tables() {
  Outcome o;
  const auto std_t = tables::make_table("poisson-std");
  const auto raw_t = tables::make_table("poisson-nonstd");
  for (std::size_t k = 0; k < 6; ++k) {
    compare_row(o, "std " + std_t.rows[k].labels[0], std_t.rows[k].values, golden::poisson_std[k], 1e-3, factor_tol);
    compare_row(o, "raw " + raw_t.rows[k].labels[0], raw_t.rows[k].values, golden::poisson_nonstd[k], 1e-3,
                factor_tol);
  }
  const auto g = tables::make_table("gamma-both");
  compare_row(o, "gamma 1.a", g.rows[0].values, golden::gamma_1a, 1e-3, factor_tol);
  compare_row(o, "gamma 1.b", g.rows[1].values, golden::gamma_1b, 1.0, factor_tol);
  compare_row(o, "gamma 2.a", g.rows[2].values, golden::gamma_2a, 1e-3, factor_tol);
  compare_row(o, "gamma 2.b", g.rows[3].values, golden::gamma_2b, 1.0, factor_tol);
  o.detail = o.pass ? "12 Poisson rows and 4 gamma rows" : o.detail;
  return o;
}

Outcome closed_form_oracles() {
  Outcome o;
  std::mt19937_64 gen(20240101);
  std::uniform_real_distribution<double> rho_d(0.0, 0.95), s_d(0.05, 3.0), psi_d(0.05, 3.0), lam_d(0.01, 10.0);
  double worst = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t T = 2 + gen() % 7;
    const bool gamma = rep % 2 == 1;
    Vector lam(T + 1);
    for (double& l : lam) l = lam_d(gen);
    const CovModel m{DynamicAr1{s_d(gen), rho_d(gen), gamma ? EdFamily::gamma(psi_d(gen)) : EdFamily::poisson(),
                                std::nullopt},
                     lam};
    const auto cf = closed_form_factors_model1(m, T);
    const auto ne = credibility_factors(m, T);
    for (std::size_t t = 0; t < T; ++t) worst = std::max(worst, std::abs(cf.alpha_star[t] - ne.alpha_star[t]));
  }
  o.require(worst <= oracle_tol, "AR(1) max diff " + num(worst));
  std::uniform_real_distribution<double> l_d(0.05, 5.0), p_d(0.0, 0.95), s0_d(0.05, 3.0);
  double worst_inar = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const double lambda = l_d(gen), p = p_d(gen), psi0 = s0_d(gen);
    const std::size_t t = 3 + gen() % 8;
    const auto cf = inar1_closed_form(lambda, p, psi0, t);
    const auto ne = credibility_factors(CovModel{Inar1Het{lambda, p, psi0}, {}}, t);
    for (std::size_t j = 0; j < t; ++j) worst_inar = std::max(worst_inar, std::abs(cf.alpha[j] - ne.alpha[j]));
    worst_inar = std::max(worst_inar, std::abs(cf.alpha0 - ne.alpha0));
  }
  o.require(worst_inar <= oracle_tol, "INAR max diff " + num(worst_inar));
  if (o.pass) o.detail = "200 AR(1) max diff " + num(worst, 3) + ", 50 INAR max diff " + num(worst_inar, 3);
  return o;
}

Outcome properties() {
  Outcome o;
  std::mt19937_64 gen(20240202);
  std::uniform_real_distribution<double> rho_d(0.01, 0.95), s_d(0.05, 3.0), psi_d(0.05, 3.0), lam_d(0.01, 10.0);
  int violations = 0, cases = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t T = 2 + rep % 9;
    // constant lambda_1..lambda_T, both families
    const double l = lam_d(gen);
    Vector lam(T + 1, l);
    lam[T] = lam_d(gen);
    const EdFamily fam = rep % 2 ? EdFamily::gamma(psi_d(gen)) : EdFamily::poisson();
    const auto f = closed_form_factors_model1(CovModel{DynamicAr1{s_d(gen), rho_d(gen), fam, std::nullopt}, lam}, T);
    bool ok = f.alpha_star[0] > 0.0;
    for (std::size_t t = 1; t < T; ++t) ok = ok && f.alpha_star[t] > f.alpha_star[t - 1];
    violations += !ok;
    ++cases;

    Vector any(T + 1);
    for (double& x : any) x = lam_d(gen);
    const auto pois = closed_form_factors_model1(
        CovModel{DynamicAr1{s_d(gen), rho_d(gen), EdFamily::poisson(), std::nullopt}, any}, T);
    violations += !check_isotonic(pois.alpha).isotonic;
    const auto gam = closed_form_factors_model1(
        CovModel{DynamicAr1{s_d(gen), rho_d(gen), EdFamily::gamma(psi_d(gen)), std::nullopt}, any}, T);
    violations += !check_isotonic(gam.alpha_star).isotonic;
    cases += 2;
  }
  std::uniform_real_distribution<double> l_d(0.05, 5.0), p_d(0.001, 0.999), s0_d(0.05, 3.0);
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t t = 3 + rep % 8;
    const auto f = inar1_closed_form(l_d(gen), p_d(gen), s0_d(gen), t);
    bool ok = true;
    for (std::size_t j = 1; j + 1 < t; ++j) ok = ok && f.alpha[0] > f.alpha[j];
    violations += !ok;
    ++cases;
  }
  o.require(violations == 0, std::to_string(violations) + " violations");
  if (o.pass) o.detail = std::to_string(cases) + " cases, 0 violations";
  return o;
}

Outcome simulation_study() {
  Outcome o;
  struct Row {
    double rho, sigma2;
  };
  const Row rows[] = {{0.0, 0.0}, {0.6, 1.0}, {0.9, 1.0}, {0.9, 2.0}};
  std::string summary;
  for (const Row& row : rows) {
    double naive = 0, stat = 0, prop = 0;
    bool true_exact = true;
    for (int s = 1; s <= sim_seeds; ++s) {
      PanelSpec spec;
      spec.n_policies = 500;
      spec.T = 5;
      spec.state = {StateFamily::bgar1, row.sigma2, row.rho};
      spec.seed = 1000 + static_cast<std::uint64_t>(s);
      EvaluateOptions opt;
      opt.methods = {Method::naive, Method::static_re, Method::proposed, Method::true_premium};
      opt.n_holdout_copies = 100;
      opt.seed = 2000 + static_cast<std::uint64_t>(s);
      const PremiumReport r = evaluate(simulate_panel(spec), opt);
      naive += *r.find(Method::naive)->relative_rmse_pct / sim_seeds;
      stat += *r.find(Method::static_re)->relative_rmse_pct / sim_seeds;
      prop += *r.find(Method::proposed)->relative_rmse_pct / sim_seeds;
      true_exact = true_exact && *r.find(Method::true_premium)->relative_rmse_pct == 100.0 &&
                   *r.find(Method::true_premium)->relative_mae_pct == 100.0;
    }
    const std::string tag = "(" + num(row.rho) + "," + num(row.sigma2) + ")";
    summary += " " + tag + " N/S/P=" + num(naive, 4) + "/" + num(stat, 4) + "/" + num(prop, 4);
    o.require(true_exact, tag + " TRUE != 100");
    if (row.rho == 0.0 && row.sigma2 == 0.0) {
      o.require(std::abs(naive - 100.0) <= sim_points, tag + " NAIVE " + num(naive));
    } else {
      o.require(prop <= naive, tag + " PROPOSED " + num(prop) + " > NAIVE " + num(naive));
      o.require(prop <= stat + sim_points, tag + " PROPOSED " + num(prop) + " > STATIC+2 " + num(stat + sim_points));
    }
  }
  o.detail = (o.pass ? "" : o.detail + "; ") + "mean relative RMSE over 5 seeds:" + summary;
  return o;
}

Outcome smc_oracles() {
  Outcome o;
  {
    const double y1 = 2, l1 = 0.8, l2 = 1.1, s2 = 1.0, rho = 0.5;
    const double quad = oracle::bgar1_posterior_premium_quadrature(y1, l1, l2, s2, rho, 400, 400);
    const auto r = exact_premium_smc(Vector{y1}, Vector{l1, l2}, StateSpec{StateFamily::bgar1, s2, rho},
                                     EdFamily::poisson(), 20000, 8101);
    o.require(std::abs(r.premium - quad) <= mc_sigmas * r.std_error,
              "T=1 smc " + num(r.premium) + " quad " + num(quad) + " se " + num(r.std_error));
    o.detail += "T=1 z=" + num((r.premium - quad) / r.std_error, 3);
  }
  {
    const Vector y{0, 2, 1, 0, 1}, lam{0.4, 0.6, 0.5, 0.7, 0.3, 0.8};
    const double s2 = 0.8;
    const double stat = static_premium(y, std::span(lam).first(5), s2, lam[5]);
    const auto r = exact_premium_smc(y, lam, StateSpec{StateFamily::bgar1, s2, 1.0}, EdFamily::poisson(), 20000, 8102);
    o.require(std::abs(r.premium - stat) <= mc_sigmas * r.std_error,
              "rho=1 smc " + num(r.premium) + " static " + num(stat) + " se " + num(r.std_error));
    o.detail += ", rho=1 z=" + num((r.premium - stat) / r.std_error, 3);
  }
  {
    const Vector y{1, 0, 2, 0, 1}, lam{0.6, 0.5, 0.8, 0.4, 0.7, 0.6};
    const StateSpec st{StateFamily::bgar1, 1.0, 0.6};
    const std::size_t ns[3] = {500, 2000, 8000};
    double se[3] = {0, 0, 0};
    constexpr int reps = 20;
    for (int k = 0; k < 3; ++k)
      for (int rep = 0; rep < reps; ++rep)
        se[k] += exact_premium_smc(y, lam, st, EdFamily::poisson(), ns[k], 8200 + rep).std_error / reps;
    const double r1 = se[0] / se[1], r2 = se[1] / se[2];
    // Quadrupling N should halve the SE; accept ratios in [1.5, 2.5].
    o.require(r1 >= 1.5 && r1 <= 2.5 && r2 >= 1.5 && r2 <= 2.5, "SE ratios " + num(r1) + ", " + num(r2));
    o.detail += ", SE ratios " + num(r1, 3) + "/" + num(r2, 3);
  }
  return o;
}

Outcome process_moments() {
  Outcome o;
  std::vector<mc::Check> all;
  for (auto&& part : {mc::bgar1_checks(9001), mc::arg1_checks(9002), mc::gar1_checks(9003), mc::inar1_checks(9004)})
    all.insert(all.end(), part.begin(), part.end());
  double worst = 0.0;
  for (const auto& c : all) {
    worst = std::max(worst, std::abs(c.z()));
    o.require(c.within(mc_sigmas), c.name + " z=" + num(c.z(), 3));
  }
  if (o.pass) o.detail = std::to_string(all.size()) + " moments, max |z| = " + num(worst, 3);
  return o;
}

Outcome glm_checks() {
  Outcome o;
  {
    const std::vector<double> y{0, 3, 1, 4, 2, 0, 1, 5};
    glm::Design x;
    for (std::size_t i = 0; i < y.size(); ++i) x.push_row(std::vector<double>{1.0});
    const auto f = glm::fit_poisson(x, y);
    o.require(std::abs(f.beta[0] - std::log(16.0 / 8.0)) <= glm_tol, "intercept-only " + num(f.beta[0], 12));
  }
  {
    const oracle::Mat rows{{1, 0.2, -1.0}, {1, 1.5, 0.3}, {1, -0.7, 0.8}, {1, 0.9, 1.2}, {1, -1.2, -0.4}, {1, 0.4, 0.0}};
    const oracle::Vec y{1, 4, 0, 3, 0, 2};
    glm::Design x;
    for (const auto& r : rows) x.push_row(r);
    const auto f = glm::fit_poisson(x, y);
    const auto ref = oracle::poisson_newton(rows, y);
    for (std::size_t j = 0; j < 3; ++j) o.require(std::abs(f.beta[j] - ref[j]) <= glm_tol, "Newton b" + std::to_string(j));
  }
  // Without a latent factor the Poisson model is correct and its SEs apply.
  // With one, claims of a policy are dependent and only the cluster-robust SE
  // is valid; the model-based SE understates it.
  const std::pair<double, double> rows[] = {{0.0, 0.0}, {1.0, 0.6}};
  for (const auto& [sigma2, rho] : rows) {
    PanelSpec spec;
    spec.state = {StateFamily::bgar1, sigma2, rho};
    spec.seed = 10101;
    const ClaimPanel p = simulate_panel(spec);
    glm::Design x;
    oracle::Mat rows_x;
    std::vector<double> y;
    std::vector<std::size_t> cluster;
    for (std::size_t i = 0; i < p.records.size(); ++i) {
      const auto& r = p.records[i];
      x.push_row(std::vector<double>{1.0, r.covariates[0]});
      rows_x.push_back({1.0, r.covariates[0]});
      y.push_back(r.y);
      cluster.push_back(i / (spec.T + 1));
    }
    const auto f = glm::fit_poisson(x, y);
    const oracle::Vec se = sigma2 == 0.0 ? oracle::Vec(f.std_err.begin(), f.std_err.end())
                                         : oracle::poisson_cluster_se(rows_x, y, f.beta, cluster);
    const std::string tag = "sigma2=" + num(sigma2) + ": ";
    o.require(f.converged, tag + "not converged");
    o.require(std::abs(f.beta[0] + 3.0) <= 3 * se[0], tag + "b0 " + num(f.beta[0]) + " se " + num(se[0]));
    o.require(std::abs(f.beta[1] - 2.0) <= 3 * se[1], tag + "b1 " + num(f.beta[1]) + " se " + num(se[1]));
    if (o.pass)
      o.detail += tag + "beta = (" + num(f.beta[0], 4) + ", " + num(f.beta[1], 4) + "), z = (" +
                  num((f.beta[0] + 3.0) / se[0], 3) + ", " + num((f.beta[1] - 2.0) / se[1], 3) + ") ";
  }
  return o;
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> fn;
};

// --known-failures=7,9 lists criteria whose failure is documented and analysed;
// they still print FAIL but do not make the exit status nonzero.
std::vector<int> parse_known(int argc, char** argv) {
  std::vector<int> out;
  const std::string flag = "--known-failures=";
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a.rfind(flag, 0) != 0) continue;
    std::size_t pos = flag.size();
    while (pos < a.size()) {
      std::size_t end = a.find(',', pos);
      if (end == std::string::npos) end = a.size();
      out.push_back(std::stoi(a.substr(pos, end - pos)));
      pos = end + 1;
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<int> known = parse_known(argc, argv);
  const Criterion criteria[] = {
      {1, "two-component factor table", 1.0, two_component},
      {2, "semi-parametric ACF factors", 1.0, semiparametric},
      {3, "ARMA(1,1) factors", 1.0, arma},
      {4, "Poisson-gamma and gamma-gamma factor tables", 1.0, factor_tables},
      {5, "closed form vs normal equations", 5.0, closed_form_oracles},
      {6, "isotonicity and positivity properties", 5.0, properties},
      {7, "simulation study", 300.0, simulation_study},
      {8, "exact-premium SMC oracles", 120.0, smc_oracles},
      {9, "process moments by Monte Carlo", 60.0, process_moments},
      {10, "Poisson GLM", 10.0, glm_checks},
  };
  int failed = 0, unexpected = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.budget_s) {
      o.pass = false;
      o.detail += " (over budget " + num(c.budget_s) + " s)";
    }
    const bool excused = std::find(known.begin(), known.end(), c.id) != known.end();
    failed += !o.pass;
    unexpected += !o.pass && !excused;
    std::printf("%s criterion %2d  %-45s %8.2fs  %s%s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, secs,
                o.detail.c_str(), !o.pass && excused ? " [known failure]" : "");
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(std::size(criteria)) - failed, std::size(criteria));
  return unexpected == 0 ? 0 : 1;
}
