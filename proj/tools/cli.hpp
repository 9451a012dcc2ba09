#pragma once

// Command implementations for the `dyncred` tool: factors, tables,
// simulate, evaluate, fit. `run` takes the argument list (without the
// program name) so the commands can be driven in-process by tests.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "config.hpp"
#include "dyncred/dyncred.hpp"
#include "dyncred/io.hpp"

namespace dyncred::cli {

namespace fs = std::filesystem;

enum exit_code : int { ok = 0, computation_error = 1, config_error = 2, io_error = 3 };

inline int exit_code_for(errc code) {
  switch (code) {
    case errc::invalid_config:
    case errc::unknown_table:
    case errc::unsupported_variance_fn:
    case errc::invalid_variant: return config_error;
    case errc::io: return io_error;
    default: return computation_error;
  }
}

struct Streams {
  std::ostream& out;
  std::ostream& err;
};

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) detail::fail(errc::io, "cannot open config '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    detail::fail(errc::invalid_config, path + ": " + e.what());
  }
}

inline void write_text_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) detail::fail(errc::io, "cannot write '" + path.string() + "'");
  os << content;
  if (!os) detail::fail(errc::io, "write failed for '" + path.string() + "'");
}

inline ClaimPanel load_panel(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) detail::fail(errc::io, "cannot open panel '" + path + "'");
  return read_panel_csv(in);
}

inline void emit_warnings(const std::vector<std::string>& warnings, std::ostream& err) {
  for (const auto& w : warnings) err << "warning: " << w << '\n';
}

inline std::string fixed(double x, int decimals) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, x);
  return buf;
}

// ---------------------------------------------------------------------------

inline int cmd_factors(const std::string& config_path, const std::string& out_flag, Streams s) {
  const json j = read_json_file(config_path);
  const FactorsConfig c = parse_factors(j);
  const CredibilityFactors f =
      c.closed_form ? closed_form_factors_model1(c.model, c.T) : credibility_factors(c.model, c.T);

  std::vector<std::string> warnings;
  if (!f.regular) {
    const auto r = check_regular(f);
    std::string idx;
    for (auto t : r.violations) idx += (idx.empty() ? "" : ",") + std::to_string(t);
    warnings.push_back("factors are not regular (non-positive alpha at t = " + idx + ")");
  }
  if (!f.isotonic_star) {
    const auto r = check_isotonic(f);
    warnings.push_back("standardized factors are not isotonic (first decrease at t = " +
                       std::to_string(*r.first_violation) + ")");
  }

  s.out << "model: " << f.model_echo << '\n';
  s.out << "T: " << f.alpha.size() << '\n';
  s.out << "alpha0: " << fixed(f.alpha0, 6) << '\n';
  s.out << "  t        alpha   alpha_star   (units of 1e-3)\n";
  for (std::size_t t = 0; t < f.alpha.size(); ++t) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%3zu %12.3f %12.3f\n", t + 1, f.alpha[t] * 1e3, f.alpha_star[t] * 1e3);
    s.out << buf;
  }
  s.out << "regular: " << (f.regular ? "yes" : "no") << '\n';
  s.out << "isotonic: " << (f.isotonic_star ? "yes" : "no") << '\n';
  emit_warnings(warnings, s.err);

  const std::string out = !out_flag.empty() ? out_flag : c.output;
  if (!out.empty()) {
    json doc = io::to_json(f);
    doc["warnings"] = warnings;
    write_text_file(out, doc.dump(2) + "\n");
  }
  return ok;
}

inline int cmd_tables(const std::vector<std::string>& ids, const std::string& out_dir, Streams s) {
  std::vector<std::string> wanted = ids;
  if (wanted.size() == 1 && wanted[0] == "all") wanted.assign(tables::table_ids.begin(), tables::table_ids.end());
  std::vector<std::pair<std::string, std::string>> rendered;
  for (const auto& id : wanted) rendered.emplace_back(id, tables::to_csv(tables::make_table(id)));
  for (const auto& [id, csv] : rendered) {
    if (rendered.size() > 1) s.out << "# " << id << '\n';
    s.out << csv;
    if (!out_dir.empty()) write_text_file(fs::path(out_dir) / (id + ".csv"), csv);
  }
  return ok;
}

inline json panel_metadata(const PanelSpec& spec, const ClaimPanel& panel) {
  return json{{"rng_algorithm", panel.rng_algorithm},
              {"seed", panel.seed},
              {"n_policies", spec.n_policies},
              {"T", spec.T},
              {"holdout_period", spec.T + 1},
              {"state",
               {{"family", std::string(to_string(spec.state.family))},
                {"sigma2", spec.state.sigma2},
                {"rho", spec.state.rho}}},
              {"family", {{"kind", std::string(to_string(spec.family.kind()))}, {"psi", spec.family.psi()}}},
              {"beta", spec.beta},
              {"covariates", {{"mean", spec.covariates.mean}, {"variance", spec.covariates.variance}}}};
}

inline int cmd_simulate(const std::string& config_path, const std::string& out_flag,
                        std::optional<std::uint64_t> seed_flag, Streams s) {
  const json j = read_json_file(config_path);
  const SimulateConfig c = parse_simulate(j, seed_flag);
  const ClaimPanel panel = simulate_panel(c.spec);
  std::ostringstream csv;
  write_panel_csv(csv, panel);
  const std::string out = !out_flag.empty() ? out_flag : (!c.output.empty() ? c.output : "panel.csv");
  if (out == "-") {
    s.out << csv.str();
    return ok;
  }
  write_text_file(out, csv.str());
  write_text_file(out + ".meta.json", panel_metadata(c.spec, panel).dump(2) + "\n");
  s.out << "wrote " << panel.records.size() << " records (" << c.spec.n_policies << " policies x "
        << c.spec.T + 1 << " periods, seed " << c.spec.seed << ") to " << out << '\n';
  return ok;
}

inline int cmd_evaluate(const std::string& config_path, const std::string& panel_flag, const std::string& out_flag,
                        std::optional<std::uint64_t> seed_flag, Streams s) {
  const json j = read_json_file(config_path);
  EvaluateConfig c = parse_evaluate(j, seed_flag);
  if (!panel_flag.empty()) {
    c.panel_path = panel_flag;
    c.simulate.reset();
  }
  const ClaimPanel panel = c.simulate ? simulate_panel(*c.simulate) : load_panel(c.panel_path);
  const PremiumReport report = evaluate(panel, c.options);

  const std::string rho_label = c.simulate ? detail::fmt_num(c.simulate->state.rho) : "-";
  const std::string s2_label = c.simulate ? detail::fmt_num(c.simulate->state.sigma2) : "-";
  const std::string table = io::relative_table(report, rho_label, s2_label);
  s.out << table;
  emit_warnings(report.warnings, s.err);

  const fs::path dir = !out_flag.empty() ? fs::path(out_flag) : fs::path(c.output_dir.empty() ? "." : c.output_dir);
  json summary = io::summary_json(report);
  summary["seed"] = c.options.seed;
  summary["n_holdout_copies"] = c.options.n_holdout_copies;
  summary["warnings"] = report.warnings;
  write_text_file(dir / "premiums.csv", io::report_rows_csv(report));
  write_text_file(dir / "summary.json", summary.dump(2) + "\n");
  write_text_file(dir / "table.txt", table);
  return ok;
}

inline int cmd_fit(const std::string& config_path, const std::string& panel_flag, const std::string& out_flag,
                   Streams s) {
  const json j = read_json_file(config_path);
  FitConfig c = parse_fit(j);
  if (!panel_flag.empty()) c.panel_path = panel_flag;
  const ClaimPanel panel = load_panel(c.panel_path);
  std::vector<PolicyHistory> policies = group_by_policy(panel);
  if (c.exclude_last_period) {
    for (auto& h : policies) {
      detail::require(h.periods() >= 2, errc::degenerate_denominator, "excluding the last period leaves no data");
      h = detail::training_part(h);
    }
  }

  std::vector<std::string> warnings;
  json doc = json::object();
  if (c.lambda_source == LambdaSource::glm) {
    const std::size_t k = c.use_covariates ? panel.n_covariates : 0;
    glm::Design x;
    std::vector<double> y;
    std::vector<double> row(k + 1, 1.0);
    for (const auto& h : policies)
      for (std::size_t t = 0; t < h.periods(); ++t) {
        for (std::size_t a = 0; a < k; ++a) row[a + 1] = h.covariates[t][a];
        x.push_row(row);
        y.push_back(h.y[t]);
      }
    const glm::GlmFit fit = glm::fit_poisson(x, y);
    std::vector<std::string> names{"(Intercept)"};
    for (std::size_t a = 1; a <= k; ++a) names.push_back("x" + std::to_string(a));
    s.out << glm::coefficient_table(fit, names);
    for (const auto& w : fit.warnings) warnings.push_back("glm: " + w);
    doc["glm"] = io::to_json(fit, names);
    for (auto& h : policies)
      for (std::size_t t = 0; t < h.periods(); ++t) {
        for (std::size_t a = 0; a < k; ++a) row[a + 1] = h.covariates[t][a];
        h.lambda[t] = glm::predict_lambda(fit, row);
      }
  }
  const MomentEstimates m = estimate_moments(policies, c.family);
  for (const auto& w : m.warnings) warnings.push_back("moments: " + w);
  s.out << "sigma2_hat: " << fixed(m.sigma2_hat, 6) << " (se " << fixed(m.sigma2_se, 6) << ")\n";
  s.out << "rho_hat:    " << fixed(m.rho_hat, 6) << " (se " << fixed(m.rho_se, 6) << ")\n";
  emit_warnings(warnings, s.err);

  doc["moments"] = io::to_json(m);
  doc["warnings"] = warnings;
  const std::string out = !out_flag.empty() ? out_flag : (!c.output.empty() ? c.output : "fit.json");
  write_text_file(out, doc.dump(2) + "\n");
  return ok;
}

// ---------------------------------------------------------------------------

inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Credibility factors, premiums and simulation for dynamic random effects models", "dyncred"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Report the resolved configuration on stderr");

  std::string config, output, panel_path;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> table_ids;

  auto* factors = app.add_subcommand("factors", "Compute credibility factors for a covariance model");
  factors->add_option("-c,--config", config, "JSON config")->required();
  factors->add_option("-o,--out", output, "JSON output file (overrides config 'output')");

  auto* tables_cmd = app.add_subcommand("tables", "Regenerate published factor tables as CSV");
  tables_cmd->add_option("ids", table_ids, "Table ids or 'all'")->required();
  tables_cmd->add_option("-d,--out-dir", output, "Directory for <id>.csv files");

  auto* simulate = app.add_subcommand("simulate", "Simulate a claim panel");
  simulate->add_option("-c,--config", config, "JSON config")->required();
  simulate->add_option("-o,--out", output, "Panel CSV path, '-' for stdout");
  simulate->add_option("-s,--seed", seed, "Master seed");

  auto* eval = app.add_subcommand("evaluate", "Score premium methods on the holdout period");
  eval->add_option("-c,--config", config, "JSON config")->required();
  eval->add_option("-p,--panel", panel_path, "Panel CSV (overrides config)");
  eval->add_option("-o,--out-dir", output, "Output directory");
  eval->add_option("-s,--seed", seed, "Master seed");

  auto* fit = app.add_subcommand("fit", "Fit the Poisson GLM and moment estimates");
  fit->add_option("-c,--config", config, "JSON config")->required();
  fit->add_option("-p,--panel", panel_path, "Panel CSV (overrides config)");
  fit->add_option("-o,--out", output, "JSON output file");

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? ok : config_error;
  }

  if (verbose) err << "dyncred: rng " << rng_algorithm << '\n';
  Streams s{out, err};
  try {
    if (*factors) return cmd_factors(config, output, s);
    if (*tables_cmd) return cmd_tables(table_ids, output, s);
    if (*simulate) return cmd_simulate(config, output, seed, s);
    if (*eval) return cmd_evaluate(config, panel_path, output, seed, s);
    if (*fit) return cmd_fit(config, panel_path, output, s);
  } catch (const error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return io_error;
  }
  return ok;
}

}  // namespace dyncred::cli
