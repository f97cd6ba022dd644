// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kunveil/estimator.hpp"
#include "kunveil/markov.hpp"
#include "kunveil/montecarlo.hpp"
#include "kunveil/support.hpp"

namespace kunveil::io {

using nlohmann::json;

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open file: " + path);
  std::ostringstream out;
  out << in.rdbuf();
  if (in.bad()) throw std::invalid_argument("cannot read file: " + path);
  return out.str();
}

// Writes through a temporary in the target directory and renames, so a
// failure partway leaves no output file behind.
inline void write_text_file(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::invalid_argument("cannot open file for writing: " + path);
    out << content;
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      fs::remove(tmp, ec);
      throw std::invalid_argument("cannot write file: " + path);
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw std::invalid_argument("cannot replace file: " + path);
  }
}

namespace detail {

inline json parse_json(const std::string& text, const std::string& origin) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw std::invalid_argument("malformed JSON in " + origin);
  return j;
}

inline char first_printable(const std::string& text) {
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) return c;
  return '\0';
}

inline Matrix matrix_from_json_rows(const json& rows, const std::string& origin) {
  if (!rows.is_array() || rows.empty())
    throw std::invalid_argument(origin + ": matrix entries must be a nonempty array of rows");
  const std::size_t n_cols = rows[0].is_array() ? rows[0].size() : 0;
  if (n_cols == 0) throw std::invalid_argument(origin + ": matrix rows must be nonempty arrays");
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(n_cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].is_array() || rows[i].size() != n_cols)
      throw std::invalid_argument(origin + ": matrix rows have inconsistent lengths");
    for (std::size_t j = 0; j < n_cols; ++j) {
      if (!rows[i][j].is_number())
        throw std::invalid_argument(origin + ": matrix entries must be numbers");
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j].get<double>();
    }
  }
  return m;
}

inline Matrix matrix_from_csv(const std::string& text, const std::string& origin) {
  std::vector<std::vector<double>> rows;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    for (char& c : line)
      if (c == ',' || c == '\t' || c == '\r') c = ' ';
    std::istringstream fields(line);
    std::vector<double> row;
    std::string tok;
    while (fields >> tok) {
      char* end = nullptr;
      const double v = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str() || *end != '\0')
        throw std::invalid_argument(origin + ": not a number: '" + tok + "'");
      row.push_back(v);
    }
    if (!row.empty()) rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::invalid_argument(origin + ": no matrix rows found");
  for (const auto& row : rows)
    if (row.size() != rows[0].size())
      throw std::invalid_argument(origin + ": matrix rows have inconsistent lengths");
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return m;
}

inline SupportSet support_from_json(const json& j, const std::string& origin) {
  if (!j.contains("n_states") || !j["n_states"].is_number_integer())
    throw std::invalid_argument(origin + ": support JSON needs integer \"n_states\"");
  if (!j.contains("pairs") || !j["pairs"].is_array())
    throw std::invalid_argument(origin + ": support JSON needs a \"pairs\" array");
  const int n = j["n_states"].get<int>();
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(j["pairs"].size());
  for (const json& e : j["pairs"]) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer())
      throw std::invalid_argument(origin + ": each support pair must be [row, col]");
    pairs.emplace_back(e[0].get<int>() - 1, e[1].get<int>() - 1);
  }
  try {
    return SupportSet(n, std::move(pairs));
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(origin + ": " + e.what());
  }
}

}  // namespace detail

// Matrix file: CSV numeric grid, or JSON {"n_states": N, "entries": [[...]]}.
inline Matrix read_matrix_file(const std::string& path) {
  const std::string text = read_text_file(path);
  if (detail::first_printable(text) == '{') {
    const json j = detail::parse_json(text, path);
    if (!j.contains("entries"))
      throw std::invalid_argument(path + ": matrix JSON needs an \"entries\" array");
    const Matrix m = detail::matrix_from_json_rows(j["entries"], path);
    if (j.contains("n_states")) {
      const Eigen::Index n = j["n_states"].get<Eigen::Index>();
      if (m.rows() != n || m.cols() != n)
        throw std::invalid_argument(path + ": entries do not match n_states");
    }
    return m;
  }
  return detail::matrix_from_csv(text, path);
}

// Support file: JSON {"n_states": N, "pairs": [[i,j],...]} with 1-based
// indices, or any matrix file whose nonzero entries define the pairs.
inline SupportSet read_support_file(const std::string& path) {
  const std::string text = read_text_file(path);
  if (detail::first_printable(text) == '{') {
    const json j = detail::parse_json(text, path);
    if (j.contains("pairs")) return detail::support_from_json(j, path);
    if (j.contains("entries"))
      return SupportSet::from_matrix(detail::matrix_from_json_rows(j["entries"], path));
    throw std::invalid_argument(path + ": support JSON needs \"pairs\" or \"entries\"");
  }
  return SupportSet::from_matrix(detail::matrix_from_csv(text, path));
}

// Observation file: integers (1-based states) separated by commas and/or
// whitespace. Returned 0-based.
inline std::vector<int> read_observations_file(const std::string& path) {
  std::string text = read_text_file(path);
  for (char& c : text)
    if (c == ',' || c == '\r' || c == '\n' || c == '\t') c = ' ';
  std::istringstream fields(text);
  std::vector<int> out;
  std::string tok;
  while (fields >> tok) {
    char* end = nullptr;
    const long v = std::strtol(tok.c_str(), &end, 10);
    if (end == tok.c_str() || *end != '\0')
      throw std::invalid_argument(path + ": not a state index: '" + tok + "'");
    if (v < 1) throw std::invalid_argument(path + ": state indices are 1-based, got " + tok);
    out.push_back(static_cast<int>(v - 1));
  }
  if (out.empty()) throw std::invalid_argument(path + ": no observations found");
  return out;
}

inline std::string format_observations(const std::vector<int>& y) {
  std::string out;
  for (int s : y) {
    out += std::to_string(s + 1);
    out += '\n';
  }
  return out;
}

// Gap distribution JSON: {"kind": "...", "params": {...}} with params
// binomial {n, p}, poisson {lambda}, geometric {p}, pmf {pmf: [...]}.
inline GapDistribution gap_from_json(const json& j, const std::string& origin) {
  if (!j.contains("kind") || !j["kind"].is_string())
    throw std::invalid_argument(origin + ": gap JSON needs a \"kind\" string");
  const std::string kind = j["kind"].get<std::string>();
  const json params = j.value("params", json::object());
  auto need = [&](const char* key) -> double {
    if (!params.contains(key) || !params[key].is_number())
      throw std::invalid_argument(origin + ": gap kind '" + kind + "' needs numeric param \"" +
                                  key + "\"");
    return params[key].get<double>();
  };
  if (kind == "binomial") {
    const double n = need("n");
    if (n < 0 || n != static_cast<double>(static_cast<int>(n)))
      throw std::invalid_argument(origin + ": binomial n must be a nonnegative integer");
    return GapDistribution::binomial(static_cast<int>(n), need("p"));
  }
  if (kind == "poisson") return GapDistribution::poisson(need("lambda"));
  if (kind == "geometric") return GapDistribution::geometric(need("p"));
  if (kind == "pmf") {
    if (!params.contains("pmf") || !params["pmf"].is_array())
      throw std::invalid_argument(origin + ": gap kind 'pmf' needs a \"pmf\" array");
    std::vector<double> pmf;
    for (const json& x : params["pmf"]) {
      if (!x.is_number()) throw std::invalid_argument(origin + ": pmf entries must be numbers");
      pmf.push_back(x.get<double>());
    }
    return GapDistribution::from_pmf(pmf);
  }
  throw std::invalid_argument(origin + ": unknown gap kind '" + kind + "'");
}

namespace detail {

inline std::vector<double> pmf_from_file(const std::string& path) {
  const std::string text = read_text_file(path);
  std::vector<double> pmf;
  if (first_printable(text) == '[') {
    const json j = parse_json(text, path);
    for (const json& x : j) {
      if (!x.is_number()) throw std::invalid_argument(path + ": pmf entries must be numbers");
      pmf.push_back(x.get<double>());
    }
  } else {
    std::string s = text;
    for (char& c : s)
      if (c == ',' || c == '\r' || c == '\n' || c == '\t') c = ' ';
    std::istringstream fields(s);
    std::string tok;
    while (fields >> tok) {
      char* end = nullptr;
      const double v = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str() || *end != '\0')
        throw std::invalid_argument(path + ": not a number: '" + tok + "'");
      pmf.push_back(v);
    }
  }
  return pmf;
}

inline double parse_double(const std::string& tok, const std::string& origin) {
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0')
    throw std::invalid_argument(origin + ": not a number: '" + tok + "'");
  return v;
}

}  // namespace detail

// Command-line gap syntax: kind:param[,param], e.g. "geometric:0.5",
// "binomial:5,0.3", "poisson:1", or "pmf:@file" with an explicit table.
inline GapDistribution parse_gap_spec(const std::string& spec) {
  const std::size_t colon = spec.find(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 >= spec.size())
    throw std::invalid_argument("gap spec must look like kind:params, got '" + spec + "'");
  const std::string kind = spec.substr(0, colon);
  const std::string rest = spec.substr(colon + 1);
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = rest.find(',', start);
    parts.push_back(rest.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  const std::string origin = "gap spec '" + spec + "'";
  if (kind == "binomial") {
    if (parts.size() != 2) throw std::invalid_argument(origin + ": binomial needs n,p");
    const double n = detail::parse_double(parts[0], origin);
    if (n < 0 || n != static_cast<double>(static_cast<int>(n)))
      throw std::invalid_argument(origin + ": binomial n must be a nonnegative integer");
    return GapDistribution::binomial(static_cast<int>(n),
                                     detail::parse_double(parts[1], origin));
  }
  if (kind == "poisson") {
    if (parts.size() != 1) throw std::invalid_argument(origin + ": poisson needs one parameter");
    return GapDistribution::poisson(detail::parse_double(parts[0], origin));
  }
  if (kind == "geometric") {
    if (parts.size() != 1) throw std::invalid_argument(origin + ": geometric needs one parameter");
    return GapDistribution::geometric(detail::parse_double(parts[0], origin));
  }
  if (kind == "pmf") {
    if (parts.size() == 1 && !parts[0].empty() && parts[0][0] == '@')
      return GapDistribution::from_pmf(detail::pmf_from_file(parts[0].substr(1)));
    throw std::invalid_argument(origin + ": pmf takes @file with an explicit table");
  }
  throw std::invalid_argument(origin + ": unknown kind '" + kind + "'");
}

// Experiment config JSON. "P" and "support" may be embedded (nested arrays /
// {"n_states","pairs"} object) or strings referencing files relative to the
// config's directory; a missing support derives from P's nonzero pattern.
// Gap entries are CLI spec strings or gap JSON objects. "init_state" is a
// 1-based state index or the string "stationary" (the default).
inline ExperimentConfig read_experiment_config(const std::string& path) {
  namespace fs = std::filesystem;
  const json j = detail::parse_json(read_text_file(path), path);
  if (!j.is_object()) throw std::invalid_argument(path + ": config must be a JSON object");
  const fs::path base = fs::path(path).parent_path();
  auto resolve = [&](const std::string& ref) {
    const fs::path p(ref);
    return p.is_absolute() ? p.string() : (base / p).string();
  };

  if (!j.contains("P")) throw std::invalid_argument(path + ": config needs \"P\"");
  Matrix p_raw;
  if (j["P"].is_string())
    p_raw = read_matrix_file(resolve(j["P"].get<std::string>()));
  else
    p_raw = detail::matrix_from_json_rows(j["P"], path);

  std::optional<SupportSet> support;
  if (j.contains("support")) {
    if (j["support"].is_string())
      support = read_support_file(resolve(j["support"].get<std::string>()));
    else
      support = detail::support_from_json(j["support"], path);
  }

  if (!j.contains("gaps") || !j["gaps"].is_array() || j["gaps"].empty())
    throw std::invalid_argument(path + ": config needs a nonempty \"gaps\" array");
  std::vector<GapDistribution> gaps;
  for (const json& g : j["gaps"]) {
    if (g.is_string())
      gaps.push_back(parse_gap_spec(g.get<std::string>()));
    else
      gaps.push_back(gap_from_json(g, path));
  }

  if (!j.contains("sample_sizes") || !j["sample_sizes"].is_array() || j["sample_sizes"].empty())
    throw std::invalid_argument(path + ": config needs a nonempty \"sample_sizes\" array");
  std::vector<int> sizes;
  for (const json& v : j["sample_sizes"]) {
    if (!v.is_number_integer())
      throw std::invalid_argument(path + ": sample sizes must be integers");
    sizes.push_back(v.get<int>());
  }

  StochasticMatrix p(std::move(p_raw));
  SupportSet s = support ? *support : SupportSet::from_matrix(p.matrix());
  ExperimentConfig cfg{j.value("name", fs::path(path).stem().string()), std::move(p),
                       std::move(s), std::move(gaps), std::move(sizes)};
  cfg.replications = j.value("replications", 1000);
  cfg.base_seed = j.value("seed", std::uint64_t{1});
  cfg.max_retries = j.value("max_retries", 1000);
  cfg.run_plain = j.value("run_plain", true);
  cfg.run_two_step = j.value("run_two_step", true);
  cfg.tol = j.value("tol", 1e-10);
  if (j.contains("init_state")) {
    const json& init = j["init_state"];
    if (init.is_string()) {
      if (init.get<std::string>() != "stationary")
        throw std::invalid_argument(path + ": init_state must be a 1-based index or \"stationary\"");
    } else if (init.is_number_integer()) {
      cfg.init_state = init.get<int>() - 1;
    } else {
      throw std::invalid_argument(path + ": init_state must be a 1-based index or \"stationary\"");
    }
  }
  cfg.validate();
  return cfg;
}

inline json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

// Full estimation report: estimates as nested row arrays, diagnostics as
// named scalars, plus the empirical kernel and the identifiability check
// the estimate was conditioned on.
inline json estimate_report_json(const EstimateReport& report, const EmpiricalKernel& kernel,
                                 const IdentifiabilityReport& ident) {
  json j;
  j["n_states"] = kernel.Q_hat.n_states();
  j["n_observations"] = kernel.n;
  j["P_hat"] = matrix_to_json(unvec(report.p_hat));
  j["P_hat_projected"] =
      report.p_hat_projected ? matrix_to_json(report.p_hat_projected->matrix()) : json();
  j["P_hat_omega"] = report.p_hat_omega ? matrix_to_json(unvec(*report.p_hat_omega)) : json();
  j["beta_hat"] = vector_to_json(report.beta_hat);
  j["Q_hat"] = matrix_to_json(kernel.Q_hat.matrix());
  j["pi_hat"] = vector_to_json(kernel.pi_hat);
  j["diagnostics"] = {
      {"rank", report.diagnostics.rank},
      {"condition_number", report.diagnostics.condition_number},
      {"used_pseudoinverse", report.diagnostics.used_pseudoinverse},
      {"projection_failed", report.diagnostics.projection_failed},
      {"omega_admissible", report.diagnostics.omega_admissible
                               ? json(*report.diagnostics.omega_admissible)
                               : json()}};
  j["identifiability"] = {{"identifiable", ident.identifiable},
                          {"rank", ident.rank},
                          {"expected", ident.expected},
                          {"min_singular_value", ident.min_singular_value}};
  return j;
}

}  // namespace kunveil::io
