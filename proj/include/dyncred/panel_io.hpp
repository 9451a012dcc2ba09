#pragma once

// Claim panel CSV: policy_id,period,lambda,y,true_r[,x1..xk]
// Floats carry 12 significant digits; an empty true_r means "not known".

#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "dyncred/error.hpp"
#include "dyncred/processes.hpp"

namespace dyncred {

namespace detail {

inline std::string fmt12(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline double parse_double(std::string_view s, std::size_t line_no) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    fail(errc::io, "line " + std::to_string(line_no) + ": bad number '" + std::string(s) + "'");
  return v;
}

inline int parse_int(std::string_view s, std::size_t line_no) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    fail(errc::io, "line " + std::to_string(line_no) + ": bad integer '" + std::string(s) + "'");
  return v;
}

}  // namespace detail

inline std::string panel_csv_header(std::size_t n_covariates) {
  std::string h = "policy_id,period,lambda,y,true_r";
  for (std::size_t j = 1; j <= n_covariates; ++j) h += ",x" + std::to_string(j);
  return h;
}

inline void write_panel_csv(std::ostream& os, const ClaimPanel& panel) {
  os << panel_csv_header(panel.n_covariates) << '\n';
  for (const auto& r : panel.records) {
    detail::require(r.covariates.size() == panel.n_covariates, errc::dimension_mismatch,
                    "record covariate count differs from the panel");
    os << r.policy_id << ',' << r.period << ',' << detail::fmt12(r.lambda) << ',' << detail::fmt12(r.y) << ',';
    if (r.true_r) os << detail::fmt12(*r.true_r);
    for (double x : r.covariates) os << ',' << detail::fmt12(x);
    os << '\n';
  }
}

inline ClaimPanel read_panel_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) detail::fail(errc::io, "panel CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = detail::split_csv(line);
  if (header.size() < 5 || header[0] != "policy_id" || header[1] != "period" || header[2] != "lambda" ||
      header[3] != "y" || header[4] != "true_r")
    detail::fail(errc::io, "panel CSV header must start with policy_id,period,lambda,y,true_r");
  ClaimPanel panel;
  panel.n_covariates = header.size() - 5;
  for (std::size_t j = 0; j < panel.n_covariates; ++j)
    if (header[5 + j] != "x" + std::to_string(j + 1))
      detail::fail(errc::io, "covariate columns must be named x1..xk in order");

  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = detail::split_csv(line);
    if (f.size() != header.size())
      detail::fail(errc::io, "line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                                 " fields, got " + std::to_string(f.size()));
    ClaimRecord r;
    r.policy_id = std::string(f[0]);
    r.period = detail::parse_int(f[1], line_no);
    r.lambda = detail::parse_double(f[2], line_no);
    r.y = detail::parse_double(f[3], line_no);
    if (!f[4].empty()) r.true_r = detail::parse_double(f[4], line_no);
    for (std::size_t j = 0; j < panel.n_covariates; ++j) r.covariates.push_back(detail::parse_double(f[5 + j], line_no));
    if (r.policy_id.empty()) detail::fail(errc::io, "line " + std::to_string(line_no) + ": empty policy_id");
    if (!(r.y >= 0.0)) detail::fail(errc::io, "line " + std::to_string(line_no) + ": claims must be >= 0");
    panel.records.push_back(std::move(r));
  }
  group_by_policy(panel);  // validates period order and lambda > 0
  return panel;
}

}  // namespace dyncred
