// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "kunveil/estimator.hpp"
#include "kunveil/markov.hpp"
#include "kunveil/parallel.hpp"
#include "kunveil/rng.hpp"
#include "kunveil/support.hpp"

namespace kunveil {

struct ExperimentConfig {
  std::string name;
  StochasticMatrix P;
  SupportSet support;
  std::vector<GapDistribution> gaps;
  std::vector<int> sample_sizes;
  int replications = 1000;
  std::uint64_t base_seed = 1;
  bool run_plain = true;
  bool run_two_step = true;
  int max_retries = 1000;
  std::optional<int> init_state;  // empty: start from the stationary law
  double tol = 1e-10;

  void validate() const {
    const int n = P.n_states();
    if (support.n_states() != n)
      throw std::invalid_argument("ExperimentConfig: support and P dimensions differ");
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (P(i, j) > 0.0 && !support.contains(i, j))
          throw std::invalid_argument("ExperimentConfig: P has mass at (" + std::to_string(i + 1) +
                                      "," + std::to_string(j + 1) + ") outside the support");
    if (replications < 1) throw std::invalid_argument("ExperimentConfig: replications must be >= 1");
    if (gaps.empty()) throw std::invalid_argument("ExperimentConfig: no gap distributions");
    if (sample_sizes.empty()) throw std::invalid_argument("ExperimentConfig: no sample sizes");
    for (int n_obs : sample_sizes)
      if (n_obs < 2) throw std::invalid_argument("ExperimentConfig: sample sizes must be >= 2");
    if (!run_plain && !run_two_step)
      throw std::invalid_argument("ExperimentConfig: no estimators selected");
    if (max_retries < 1) throw std::invalid_argument("ExperimentConfig: max_retries must be >= 1");
    if (init_state && (*init_state < 0 || *init_state >= n))
      throw std::invalid_argument("ExperimentConfig: init_state out of range");
  }
};

struct RiskCell {
  int n = 0;
  std::string mu;
  std::string estimator;  // "plain" or "two_step"
  double mse = std::numeric_limits<double>::quiet_NaN();
  double std_err = std::numeric_limits<double>::quiet_NaN();
  int reps = 0;      // replications contributing to the mean
  int failures = 0;  // replications excluded by a failure
};

struct RiskTable {
  std::string name;
  std::vector<RiskCell> cells;
};

namespace detail {

inline RiskCell summarize_losses(int n, const std::string& mu, const std::string& estimator,
                                 const std::vector<double>& losses) {
  RiskCell cell;
  cell.n = n;
  cell.mu = mu;
  cell.estimator = estimator;
  double sum = 0.0;
  for (double x : losses) {
    if (std::isnan(x)) {
      ++cell.failures;
    } else {
      sum += x;
      ++cell.reps;
    }
  }
  if (cell.reps > 0) cell.mse = sum / cell.reps;
  if (cell.reps > 1) {
    double sq = 0.0;
    for (double x : losses)
      if (!std::isnan(x)) sq += (x - cell.mse) * (x - cell.mse);
    cell.std_err = std::sqrt(sq / (static_cast<double>(cell.reps) * (cell.reps - 1)));
  }
  return cell;
}

}  // namespace detail

// Replicated risk estimation: for every (n, mu) cell, conditioned trajectories
// feed the requested estimators and squared errors against vec(P) are
// averaged. The plain estimate is scored after projection onto the stochastic
// matrices: the raw least squares solution is unbounded near rank drops of
// the commutator system, so single replications would otherwise dominate
// every small-sample mean. The weighted estimate is scored as constructed,
// keeping the cell sensitive to the instability of the plug-in weighting
// that the comparison is designed to expose. Failed replications (retry
// budget, uncovered state, inadmissible weighting, failed projection) are
// excluded and counted, never resampled. Per-replication seeds depend only
// on (base_seed, n, mu, replication), so any sub-grid rerun reproduces the
// full run's cells bit for bit, at any thread count.
inline RiskTable run_experiment(const ExperimentConfig& cfg, int threads = 0) {
  cfg.validate();
  const AffineChart chart = build_chart(cfg.support);
  const Vector p_true = vec(cfg.P.matrix());
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<int> sizes = cfg.sample_sizes;
  std::sort(sizes.begin(), sizes.end());
  RiskTable table;
  table.name = cfg.name;
  const int workers = thread_budget(threads);
  for (int n_obs : sizes) {
    for (const GapDistribution& mu : cfg.gaps) {
      const std::uint64_t mu_tag = fnv1a(mu.to_string());
      std::vector<double> loss_plain(cfg.replications, nan);
      std::vector<double> loss_two(cfg.replications, nan);
      parallel_for(cfg.replications, workers, [&](int r) {
        const std::uint64_t seed =
            derive_seed(cfg.base_seed, {static_cast<std::uint64_t>(n_obs), mu_tag,
                                        static_cast<std::uint64_t>(r)});
        try {
          const ConditionedSample sample = sample_until_all_states(
              cfg.P, mu, n_obs, cfg.init_state, seed, cfg.max_retries);
          const EmpiricalKernel kernel = empirical_kernel(sample.states, cfg.P.n_states());
          if (cfg.run_two_step) {
            const EstimateReport rep = two_step_from_kernel(kernel, chart, cfg.tol);
            if (rep.p_hat_projected)
              loss_plain[r] =
                  (vec(rep.p_hat_projected->matrix()) - p_true).squaredNorm();
            if (rep.p_hat_omega) loss_two[r] = (*rep.p_hat_omega - p_true).squaredNorm();
          } else {
            const EstimateReport rep = estimate(kernel.Q_hat, chart, cfg.tol);
            if (rep.p_hat_projected)
              loss_plain[r] =
                  (vec(rep.p_hat_projected->matrix()) - p_true).squaredNorm();
          }
        } catch (const retry_exhausted_error&) {
        } catch (const unvisited_state_error&) {
        } catch (const numerical_error&) {
        }
      });
      if (cfg.run_plain)
        table.cells.push_back(detail::summarize_losses(n_obs, mu.to_string(), "plain", loss_plain));
      if (cfg.run_two_step)
        table.cells.push_back(detail::summarize_losses(n_obs, mu.to_string(), "two_step", loss_two));
    }
  }
  return table;
}

// The three benchmark configurations. Support sets are the positive entries
// of each matrix; replication count matches the source experiments and is
// meant to be overridden for desk-scale runs.
inline std::vector<ExperimentConfig> builtin_examples() {
  std::vector<ExperimentConfig> out;
  {
    Matrix p(5, 5);
    p << 0.00, 0.61, 0.00, 0.00, 0.39,
         0.07, 0.00, 0.48, 0.27, 0.18,
         0.53, 0.00, 0.30, 0.00, 0.17,
         0.18, 0.20, 0.27, 0.35, 0.00,
         0.20, 0.00, 0.69, 0.00, 0.11;
    ExperimentConfig cfg{"example-1",
                         StochasticMatrix(p),
                         SupportSet::from_matrix(p),
                         {GapDistribution::binomial(5, 0.3), GapDistribution::poisson(1.0),
                          GapDistribution::geometric(0.5)},
                         {200, 1000, 5000}};
    cfg.replications = 10000;
    out.push_back(std::move(cfg));
  }
  {
    Matrix p = Matrix::Zero(11, 11);
    p(0, 1) = 1.0;
    const double down[] = {0.53, 0.65, 0.45, 0.30, 0.62, 0.68, 0.64, 0.52, 0.61};
    for (int i = 1; i <= 9; ++i) {
      p(i, i - 1) = down[i - 1];
      p(i, i + 1) = 1.0 - down[i - 1];
    }
    p(10, 9) = 1.0;
    ExperimentConfig cfg{"example-2",
                         StochasticMatrix(p),
                         SupportSet::from_matrix(p),
                         {GapDistribution::binomial(2, 0.5), GapDistribution::poisson(1.0),
                          GapDistribution::geometric(0.5)},
                         {200, 1000, 5000}};
    cfg.replications = 10000;
    // Periodic chain: there is no aperiodic stationary regime to start from,
    // so trajectories start in state 1.
    cfg.init_state = 0;
    out.push_back(std::move(cfg));
  }
  {
    Matrix p(4, 4);
    p << 0.00, 0.22, 0.33, 0.45,
         0.38, 0.00, 0.06, 0.56,
         0.40, 0.13, 0.00, 0.47,
         0.42, 0.20, 0.38, 0.00;
    ExperimentConfig cfg{"example-3",
                         StochasticMatrix(p),
                         SupportSet::from_matrix(p),
                         {GapDistribution::binomial(2, 0.5), GapDistribution::poisson(1.0),
                          GapDistribution::geometric(0.5)},
                         {200, 1000, 5000}};
    cfg.replications = 10000;
    out.push_back(std::move(cfg));
  }
  return out;
}

enum class TableFormat { csv, json, text };

namespace detail {

inline std::string format_cell_number(double x) {
  if (std::isnan(x)) return "";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", x);
  return buf;
}

inline std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::string json_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

}  // namespace detail

// Cells arrive ordered (n ascending, gap in config order, plain before
// two_step) from run_experiment; emission preserves that order, so equal
// inputs serialize byte-identically.
inline std::string emit_table(const RiskTable& table, TableFormat format) {
  std::string out;
  switch (format) {
    case TableFormat::csv: {
      out = "example,n,mu,estimator,mse,std_err,reps,failures\n";
      for (const RiskCell& c : table.cells) {
        out += detail::csv_quote(table.name) + "," + std::to_string(c.n) + "," +
               detail::csv_quote(c.mu) + "," + c.estimator + "," +
               detail::format_cell_number(c.mse) + "," + detail::format_cell_number(c.std_err) +
               "," + std::to_string(c.reps) + "," + std::to_string(c.failures) + "\n";
      }
      return out;
    }
    case TableFormat::json: {
      out = "{\"example\":\"" + detail::json_escape(table.name) + "\",\"cells\":[";
      for (std::size_t i = 0; i < table.cells.size(); ++i) {
        const RiskCell& c = table.cells[i];
        if (i > 0) out += ",";
        out += "{\"n\":" + std::to_string(c.n) + ",\"mu\":\"" + detail::json_escape(c.mu) +
               "\",\"estimator\":\"" + c.estimator + "\",\"mse\":" +
               (std::isnan(c.mse) ? "null" : detail::format_cell_number(c.mse)) +
               ",\"std_err\":" +
               (std::isnan(c.std_err) ? "null" : detail::format_cell_number(c.std_err)) +
               ",\"reps\":" + std::to_string(c.reps) +
               ",\"failures\":" + std::to_string(c.failures) + "}";
      }
      out += "]}\n";
      return out;
    }
    case TableFormat::text: {
      std::vector<int> ns;
      std::vector<std::pair<std::string, std::string>> rows;  // (mu, estimator)
      for (const RiskCell& c : table.cells) {
        if (std::find(ns.begin(), ns.end(), c.n) == ns.end()) ns.push_back(c.n);
        const auto key = std::make_pair(c.mu, c.estimator);
        if (std::find(rows.begin(), rows.end(), key) == rows.end()) rows.push_back(key);
      }
      auto find_cell = [&](const std::pair<std::string, std::string>& key,
                           int n) -> const RiskCell* {
        for (const RiskCell& c : table.cells)
          if (c.n == n && c.mu == key.first && c.estimator == key.second) return &c;
        return nullptr;
      };
      std::size_t mu_width = 2;
      for (const auto& r : rows) mu_width = std::max(mu_width, r.first.size());
      char buf[128];
      out = "# " + table.name + "\n";
      std::snprintf(buf, sizeof(buf), "%-*s  %-9s", static_cast<int>(mu_width), "mu", "estimator");
      out += buf;
      for (int n : ns) {
        std::snprintf(buf, sizeof(buf), "  %-18s", ("n=" + std::to_string(n)).c_str());
        out += buf;
      }
      out += "\n";
      for (const auto& key : rows) {
        std::snprintf(buf, sizeof(buf), "%-*s  %-9s", static_cast<int>(mu_width),
                      key.first.c_str(), key.second.c_str());
        out += buf;
        for (int n : ns) {
          const RiskCell* c = find_cell(key, n);
          std::string cell = "-";
          if (c && !std::isnan(c->mse)) {
            std::snprintf(buf, sizeof(buf), "%.4f (%.4f)", c->mse,
                          std::isnan(c->std_err) ? 0.0 : c->std_err);
            cell = buf;
            if (c->failures > 0) cell += " [" + std::to_string(c->failures) + " fail]";
          }
          std::snprintf(buf, sizeof(buf), "  %-18s", cell.c_str());
          out += buf;
        }
        out += "\n";
      }
      return out;
    }
  }
  return out;
}

}  // namespace kunveil
