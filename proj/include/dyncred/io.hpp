#pragma once

// JSON and CSV renderings of results. Uses nlohmann/json.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include <json.hpp>

#include "dyncred/credibility.hpp"
#include "dyncred/glm.hpp"
#include "dyncred/premiums.hpp"

namespace dyncred::io {

using nlohmann::json;

/// x rounded to `digits` significant digits (the JSON writer then prints the
/// shortest representation of the rounded value).
inline double round_sig(double x, int digits) {
  if (x == 0.0 || !std::isfinite(x)) return x;
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return std::strtod(buf, nullptr);
}

inline json rounded(const Vector& v, int digits) {
  json a = json::array();
  for (double x : v) a.push_back(round_sig(x, digits));
  return a;
}

inline json to_json(const CredibilityFactors& f) {
  return json{{"alpha0", round_sig(f.alpha0, 10)},
              {"alpha", rounded(f.alpha, 10)},
              {"alpha_star", rounded(f.alpha_star, 10)},
              {"regular", f.regular},
              {"isotonic", f.isotonic_star},
              {"model", f.model_echo}};
}

inline json to_json(const MomentEstimates& m) {
  return json{{"sigma2_hat", round_sig(m.sigma2_hat, 10)}, {"rho_hat", round_sig(m.rho_hat, 10)},
              {"psi_hat", round_sig(m.psi_hat, 10)},       {"sigma2_se", round_sig(m.sigma2_se, 10)},
              {"rho_se", round_sig(m.rho_se, 10)},         {"n_used", m.n_used},
              {"sigma2_clamped", m.sigma2_clamped},        {"rho_clamped", m.rho_clamped}};
}

inline json to_json(const glm::GlmFit& fit, const std::vector<std::string>& names) {
  json coefs = json::array();
  for (std::size_t j = 0; j < fit.beta.size(); ++j)
    coefs.push_back({{"name", j < names.size() ? names[j] : "b" + std::to_string(j)},
                     {"estimate", round_sig(fit.beta[j], 10)},
                     {"std_err", round_sig(fit.std_err[j], 10)},
                     {"p_value", round_sig(fit.p_values[j], 10)}});
  return json{{"coefficients", coefs},
              {"converged", fit.converged},
              {"iterations", fit.iterations},
              {"log_likelihood", round_sig(fit.log_likelihood, 10)},
              {"deviance", round_sig(fit.deviance, 10)}};
}

inline std::string report_rows_csv(const PremiumReport& r) {
  std::string out = "policy_id,method,predicted\n";
  char buf[48];
  for (const auto& row : r.rows) {
    std::snprintf(buf, sizeof buf, "%.12g", row.predicted);
    out += row.policy_id;
    out += ',';
    out += to_string(row.method);
    out += ',';
    out += buf;
    out += '\n';
  }
  return out;
}

inline json summary_json(const PremiumReport& r) {
  json methods = json::object();
  for (const auto& s : r.summary) {
    json m{{"rmse", round_sig(s.rmse, 10)}, {"mae", round_sig(s.mae, 10)}};
    m["relative_rmse_pct"] = s.relative_rmse_pct ? json(round_sig(*s.relative_rmse_pct, 10)) : json(nullptr);
    m["relative_mae_pct"] = s.relative_mae_pct ? json(round_sig(*s.relative_mae_pct, 10)) : json(nullptr);
    methods[std::string(to_string(s.method))] = m;
  }
  json j{{"methods", methods}, {"moments", to_json(r.moments)}, {"static_sigma2", round_sig(r.static_sigma2, 10)},
         {"has_truth", r.has_truth}};
  if (r.glm_fit) {
    std::vector<std::string> names{"(Intercept)"};
    for (std::size_t k = 1; k < r.glm_fit->beta.size(); ++k) names.push_back("x" + std::to_string(k));
    j["glm"] = to_json(*r.glm_fit, names);
  }
  return j;
}

/// Relative RMSE and MAE (TRUE = 100) on one line per run, methods in the
/// order NAIVE, STATIC, PROPOSED, EXACT_SMC, TRUE, HARVEY. Falls back to
/// absolute metrics when the panel has no truth.
inline std::string relative_table(const PremiumReport& r, const std::string& rho_label,
                                  const std::string& sigma2_label) {
  std::string out;
  char buf[64];
  const bool rel = r.has_truth;
  out += rel ? "relative prediction errors (TRUE = 100)\n" : "prediction errors (no truth available)\n";
  std::snprintf(buf, sizeof buf, "%6s %7s", "rho", "sigma2");
  out += buf;
  for (const char* block : {"RMSE", "MAE"}) {
    for (const auto& s : r.summary) {
      std::snprintf(buf, sizeof buf, " %10s", (std::string(block) + ":" + std::string(to_string(s.method))).c_str());
      out += buf;
    }
  }
  out += '\n';
  std::snprintf(buf, sizeof buf, "%6s %7s", rho_label.c_str(), sigma2_label.c_str());
  out += buf;
  for (int block = 0; block < 2; ++block) {
    for (const auto& s : r.summary) {
      if (rel) {
        std::snprintf(buf, sizeof buf, " %10.0f", block == 0 ? *s.relative_rmse_pct : *s.relative_mae_pct);
      } else {
        std::snprintf(buf, sizeof buf, " %10.4f", block == 0 ? s.rmse : s.mae);
      }
      out += buf;
    }
  }
  out += '\n';
  return out;
}

}  // namespace dyncred::io
