#pragma once

// JSON run-configuration parsing for the command-line tool. Every block is
// checked for unknown keys and every number for its domain before any
// computation starts.

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "dyncred/dyncred.hpp"

namespace dyncred::cli {

using nlohmann::json;

namespace cfg {

[[noreturn]] inline void bad(const std::string& path, const std::string& what) {
  detail::fail(errc::invalid_config, path + ": " + what);
}

inline void only_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) bad(path, "expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items())
    if (!ok.count(key)) bad(path, "unknown key '" + key + "'");
}

inline double number(const json& j, const std::string& path) {
  if (!j.is_number()) bad(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) bad(path, "must be finite");
  return v;
}

inline double number(const json& obj, const char* key, const std::string& path) {
  if (!obj.contains(key)) bad(path, std::string("missing '") + key + "'");
  return number(obj.at(key), path + "." + key);
}

inline double number_or(const json& obj, const char* key, double fallback, const std::string& path) {
  return obj.contains(key) ? number(obj.at(key), path + "." + key) : fallback;
}

inline double positive(const json& obj, const char* key, const std::string& path) {
  const double v = number(obj, key, path);
  if (!(v > 0.0)) bad(path + "." + key, "must be > 0");
  return v;
}

inline double non_negative(const json& obj, const char* key, const std::string& path) {
  const double v = number(obj, key, path);
  if (!(v >= 0.0)) bad(path + "." + key, "must be >= 0");
  return v;
}

inline double open_unit(const json& obj, const char* key, const std::string& path) {
  const double v = number(obj, key, path);
  if (!(std::abs(v) < 1.0)) bad(path + "." + key, "must lie in (-1, 1)");
  return v;
}

inline std::uint64_t count(const json& j, const std::string& path, std::uint64_t min_value) {
  if (!j.is_number_integer() && !j.is_number_unsigned()) bad(path, "expected an integer");
  if (j.is_number_integer() && j.get<std::int64_t>() < static_cast<std::int64_t>(min_value))
    bad(path, "must be >= " + std::to_string(min_value));
  return j.get<std::uint64_t>();
}

inline std::string text(const json& j, const std::string& path) {
  if (!j.is_string()) bad(path, "expected a string");
  return j.get<std::string>();
}

inline Vector vector(const json& j, const std::string& path) {
  if (!j.is_array()) bad(path, "expected an array of numbers");
  Vector v;
  for (std::size_t i = 0; i < j.size(); ++i) v.push_back(number(j[i], path + "[" + std::to_string(i) + "]"));
  return v;
}

}  // namespace cfg

inline EdFamily parse_family(const json& j, const std::string& path) {
  if (j.is_string()) {
    const auto kind = j.get<std::string>();
    if (kind == "poisson") return EdFamily::poisson();
    cfg::bad(path, "family '" + kind + "' needs an object with its dispersion psi");
  }
  cfg::only_keys(j, path, {"kind", "psi"});
  const std::string kind = cfg::text(j.value("kind", json()), path + ".kind");
  if (kind == "poisson") {
    if (j.contains("psi") && cfg::number(j, "psi", path) != 1.0) cfg::bad(path + ".psi", "Poisson forces psi = 1");
    return EdFamily::poisson();
  }
  if (kind == "gamma") return EdFamily::gamma(cfg::positive(j, "psi", path));
  detail::fail(errc::unsupported_variance_fn,
               path + ".kind: '" + kind + "' (supported: poisson, gamma; otherwise supply q_star)");
}

inline StateFamily parse_state_family(const json& j, const std::string& path) {
  const std::string s = cfg::text(j, path);
  for (StateFamily f : {StateFamily::bgar1, StateFamily::arg1, StateFamily::gar1, StateFamily::iid,
                        StateFamily::constant})
    if (to_string(f) == s) return f;
  cfg::bad(path, "unknown state family '" + s + "' (bgar1, arg1, gar1, iid, constant)");
}

/// The "model" block of a factors config.
inline CovModel parse_model(const json& j, const std::string& path) {
  if (!j.is_object() || !j.contains("variant")) cfg::bad(path, "needs a 'variant'");
  const std::string v = cfg::text(j.at("variant"), path + ".variant");
  const auto family = [&] { return j.contains("family") ? parse_family(j.at("family"), path + ".family") : EdFamily::poisson(); };
  CovModel m;
  if (v == "static_re") {
    cfg::only_keys(j, path, {"variant", "sigma2", "family"});
    m.variant = StaticRe{cfg::positive(j, "sigma2", path), family()};
  } else if (v == "dynamic_ar1") {
    cfg::only_keys(j, path, {"variant", "sigma2", "rho", "family", "q_star"});
    DynamicAr1 d{cfg::positive(j, "sigma2", path), cfg::open_unit(j, "rho", path), family(), std::nullopt};
    if (j.contains("q_star")) {
      d.q_star = cfg::vector(j.at("q_star"), path + ".q_star");
      for (double q : *d.q_star)
        if (!(q > 0.0)) cfg::bad(path + ".q_star", "entries must be > 0");
    }
    m.variant = d;
  } else if (v == "two_component") {
    cfg::only_keys(j, path, {"variant", "sigma1_sq", "sigma2_sq", "rho", "psi", "variance_fn"});
    TwoComponent t{cfg::positive(j, "sigma1_sq", path), cfg::non_negative(j, "sigma2_sq", path),
                   cfg::open_unit(j, "rho", path), cfg::non_negative(j, "psi", path), VarianceFn::identity};
    if (j.contains("variance_fn")) {
      const std::string fn = cfg::text(j.at("variance_fn"), path + ".variance_fn");
      if (fn == "identity") t.variance_fn = VarianceFn::identity;
      else if (fn == "square") t.variance_fn = VarianceFn::square;
      else detail::fail(errc::unsupported_variance_fn, path + ".variance_fn: '" + fn + "' (identity, square)");
    }
    m.variant = t;
  } else if (v == "arbitrary_acf") {
    cfg::only_keys(j, path, {"variant", "sigma2", "correlations", "family"});
    if (!j.contains("correlations")) cfg::bad(path, "missing 'correlations'");
    ArbitraryAcf a{cfg::positive(j, "sigma2", path), cfg::vector(j.at("correlations"), path + ".correlations"),
                   family()};
    for (double r : a.correlations)
      if (!(std::abs(r) < 1.0)) cfg::bad(path + ".correlations", "entries must lie in (-1, 1)");
    m.variant = a;
  } else if (v == "arma11") {
    cfg::only_keys(j, path, {"variant", "phi", "theta", "sigma_e_sq"});
    const double phi = cfg::number(j, "phi", path);
    if (!(std::abs(phi) < 1.0)) detail::fail(errc::non_stationary, path + ".phi: |phi| must be < 1");
    m.variant = Arma11{phi, cfg::number(j, "theta", path), cfg::positive(j, "sigma_e_sq", path)};
  } else if (v == "inar1_het") {
    cfg::only_keys(j, path, {"variant", "lambda", "p", "psi0"});
    const double p = cfg::number(j, "p", path);
    if (!(p >= 0.0 && p < 1.0)) cfg::bad(path + ".p", "must lie in [0, 1)");
    m.variant = Inar1Het{cfg::positive(j, "lambda", path), p, cfg::non_negative(j, "psi0", path)};
  } else {
    detail::fail(errc::invalid_variant, path + ".variant: unknown '" + v +
                                            "' (static_re, dynamic_ar1, two_component, arbitrary_acf, arma11, "
                                            "inar1_het)");
  }
  return m;
}

struct FactorsConfig {
  CovModel model;
  std::size_t T = 0;
  bool closed_form = false;
  std::string output;
};

inline FactorsConfig parse_factors(const json& j) {
  cfg::only_keys(j, "config", {"model", "lambdas", "T", "method", "output"});
  if (!j.contains("model")) cfg::bad("config", "missing 'model'");
  FactorsConfig c;
  c.model = parse_model(j.at("model"), "model");
  if (j.contains("lambdas")) {
    c.model.lambdas = cfg::vector(j.at("lambdas"), "lambdas");
    for (double l : c.model.lambdas)
      if (!(l > 0.0)) cfg::bad("lambdas", "entries must be > 0");
    if (c.model.lambdas.size() < 2) cfg::bad("lambdas", "need lambda_1..lambda_{T+1} with T >= 1");
  }
  if (j.contains("T")) {
    c.T = cfg::count(j.at("T"), "T", 1);
    if (!c.model.lambdas.empty() && c.model.lambdas.size() < c.T + 1) cfg::bad("T", "lambdas must have T+1 entries");
  } else {
    if (c.model.lambdas.empty()) cfg::bad("config", "give 'T' or 'lambdas'");
    c.T = c.model.lambdas.size() - 1;
  }
  if (j.contains("method")) {
    const std::string m = cfg::text(j.at("method"), "method");
    if (m == "closed_form") c.closed_form = true;
    else if (m != "normal_equations") cfg::bad("method", "must be 'normal_equations' or 'closed_form'");
  }
  if (j.contains("output")) c.output = cfg::text(j.at("output"), "output");
  return c;
}

/// Seed precedence: command-line flag, then config, then DYNCRED_SEED, then 1.
inline std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, const json& j) {
  if (flag) return *flag;
  if (j.contains("seed")) return cfg::count(j.at("seed"), "seed", 0);
  if (const char* env = std::getenv("DYNCRED_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0') detail::fail(errc::invalid_config, "DYNCRED_SEED is not an unsigned integer");
    return v;
  }
  return 1;
}

struct SimulateConfig {
  PanelSpec spec;
  std::string output;
};

inline PanelSpec parse_panel_spec(const json& j, const std::string& path, std::uint64_t seed) {
  cfg::only_keys(j, path, {"n_policies", "T", "state", "family", "beta", "covariates", "seed", "output"});
  PanelSpec s;
  s.seed = seed;
  if (j.contains("n_policies")) s.n_policies = cfg::count(j.at("n_policies"), path + ".n_policies", 1);
  if (j.contains("T")) s.T = cfg::count(j.at("T"), path + ".T", 1);
  if (j.contains("state")) {
    const json& st = j.at("state");
    const std::string sp = path + ".state";
    cfg::only_keys(st, sp, {"family", "sigma2", "rho"});
    if (st.contains("family")) s.state.family = parse_state_family(st.at("family"), sp + ".family");
    s.state.sigma2 = cfg::non_negative(st, "sigma2", sp);
    s.state.rho = cfg::number_or(st, "rho", 0.0, sp);
    if (!(s.state.rho >= 0.0 && s.state.rho <= 1.0)) cfg::bad(sp + ".rho", "must lie in [0, 1]");
  }
  if (j.contains("family")) s.family = parse_family(j.at("family"), path + ".family");
  if (j.contains("beta")) {
    s.beta = cfg::vector(j.at("beta"), path + ".beta");
    if (s.beta.empty()) cfg::bad(path + ".beta", "needs at least an intercept");
  }
  if (j.contains("covariates")) {
    const json& cv = j.at("covariates");
    cfg::only_keys(cv, path + ".covariates", {"mean", "variance"});
    s.covariates.mean = cfg::number_or(cv, "mean", 0.0, path + ".covariates");
    s.covariates.variance = cfg::number_or(cv, "variance", 0.6, path + ".covariates");
    if (!(s.covariates.variance >= 0.0)) cfg::bad(path + ".covariates.variance", "must be >= 0");
  }
  s.validate();
  return s;
}

inline SimulateConfig parse_simulate(const json& j, std::optional<std::uint64_t> seed_flag) {
  SimulateConfig c;
  c.spec = parse_panel_spec(j, "config", resolve_seed(seed_flag, j));
  if (j.contains("output")) c.output = cfg::text(j.at("output"), "output");
  return c;
}

struct EvaluateConfig {
  std::string panel_path;
  std::optional<PanelSpec> simulate;
  EvaluateOptions options;
  std::string output_dir;
};

inline EvaluateConfig parse_evaluate(const json& j, std::optional<std::uint64_t> seed_flag) {
  cfg::only_keys(j, "config", {"panel", "simulate", "methods", "family", "lambda_source", "static_sigma2", "smc",
                               "harvey", "n_holdout_copies", "seed", "output_dir"});
  EvaluateConfig c;
  const std::uint64_t seed = resolve_seed(seed_flag, j);
  c.options.seed = seed;
  if (j.contains("panel")) c.panel_path = cfg::text(j.at("panel"), "panel");
  if (j.contains("simulate")) {
    const json& sim = j.at("simulate");
    const std::uint64_t sim_seed = sim.is_object() && sim.contains("seed") ? cfg::count(sim.at("seed"), "simulate.seed", 0) : seed;
    c.simulate = parse_panel_spec(sim, "simulate", sim_seed);
  }
  if (c.panel_path.empty() == !c.simulate.has_value())
    cfg::bad("config", "give exactly one of 'panel' (CSV path) or 'simulate' (panel spec)");
  if (j.contains("methods")) {
    const json& m = j.at("methods");
    if (!m.is_array() || m.empty()) cfg::bad("methods", "expected a non-empty array of method names");
    c.options.methods.clear();
    for (const auto& name : m) c.options.methods.push_back(method_from_string(cfg::text(name, "methods")));
  }
  if (j.contains("family")) c.options.family = parse_family(j.at("family"), "family");
  else if (c.simulate) c.options.family = c.simulate->family;
  if (j.contains("lambda_source")) {
    const std::string s = cfg::text(j.at("lambda_source"), "lambda_source");
    if (s == "glm") c.options.lambda_source = LambdaSource::glm;
    else if (s == "panel") c.options.lambda_source = LambdaSource::panel;
    else cfg::bad("lambda_source", "must be 'glm' or 'panel'");
  }
  if (j.contains("static_sigma2")) {
    const std::string s = cfg::text(j.at("static_sigma2"), "static_sigma2");
    if (s == "reestimate") c.options.static_sigma = StaticSigmaSource::reestimate;
    else if (s == "dynamic") c.options.static_sigma = StaticSigmaSource::dynamic;
    else cfg::bad("static_sigma2", "must be 'reestimate' or 'dynamic'");
  }
  if (j.contains("smc")) {
    const json& s = j.at("smc");
    cfg::only_keys(s, "smc", {"state", "n_particles"});
    if (s.contains("state")) c.options.smc_state = parse_state_family(s.at("state"), "smc.state");
    if (s.contains("n_particles")) c.options.n_particles = cfg::count(s.at("n_particles"), "smc.n_particles", 20);
  }
  if (j.contains("harvey")) {
    const json& h = j.at("harvey");
    cfg::only_keys(h, "harvey", {"a0", "alpha"});
    if (h.contains("a0")) c.options.harvey_a0 = cfg::positive(h, "a0", "harvey");
    if (h.contains("alpha")) {
      const double a = cfg::number(h, "alpha", "harvey");
      if (!(a > 0.0 && a <= 1.0)) detail::fail(errc::invalid_alpha, "harvey.alpha must lie in (0, 1]");
      c.options.harvey_alpha = a;
    }
  }
  if (j.contains("n_holdout_copies"))
    c.options.n_holdout_copies = cfg::count(j.at("n_holdout_copies"), "n_holdout_copies", 1);
  if (j.contains("output_dir")) c.output_dir = cfg::text(j.at("output_dir"), "output_dir");
  return c;
}

struct FitConfig {
  std::string panel_path;
  EdFamily family = EdFamily::poisson();
  bool use_covariates = true;
  bool exclude_last_period = false;
  LambdaSource lambda_source = LambdaSource::glm;
  std::string output;
};

inline FitConfig parse_fit(const json& j) {
  cfg::only_keys(j, "config", {"panel", "family", "covariates", "exclude_last_period", "lambda_source", "output"});
  FitConfig c;
  if (!j.contains("panel")) cfg::bad("config", "missing 'panel'");
  c.panel_path = cfg::text(j.at("panel"), "panel");
  if (j.contains("family")) c.family = parse_family(j.at("family"), "family");
  auto flag = [&](const char* key, bool& out) {
    if (!j.contains(key)) return;
    if (!j.at(key).is_boolean()) cfg::bad(key, "expected true or false");
    out = j.at(key).get<bool>();
  };
  flag("covariates", c.use_covariates);
  flag("exclude_last_period", c.exclude_last_period);
  if (j.contains("lambda_source")) {
    const std::string s = cfg::text(j.at("lambda_source"), "lambda_source");
    if (s == "glm") c.lambda_source = LambdaSource::glm;
    else if (s == "panel") c.lambda_source = LambdaSource::panel;
    else cfg::bad("lambda_source", "must be 'glm' or 'panel'");
  }
  if (j.contains("output")) c.output = cfg::text(j.at("output"), "output");
  return c;
}

}  // namespace dyncred::cli
