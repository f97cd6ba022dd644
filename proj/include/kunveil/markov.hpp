// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kunveil/errors.hpp"
#include "kunveil/graph.hpp"
#include "kunveil/linalg.hpp"
#include "kunveil/rng.hpp"

namespace kunveil {

// Row-stochastic matrix. Entries are nonnegative and every row sums to one
// within row_sum_tol; both are checked at construction.
class StochasticMatrix {
public:
  explicit StochasticMatrix(Matrix p, double row_sum_tol = 1e-12) : p_(std::move(p)) {
    if (p_.rows() != p_.cols() || p_.rows() < 1)
      throw std::invalid_argument("StochasticMatrix: matrix must be square and nonempty");
    for (Eigen::Index i = 0; i < p_.rows(); ++i) {
      double row_sum = 0.0;
      for (Eigen::Index j = 0; j < p_.cols(); ++j) {
        if (!(p_(i, j) >= 0.0))
          throw std::invalid_argument("StochasticMatrix: negative or NaN entry in row " +
                                      std::to_string(i + 1));
        row_sum += p_(i, j);
      }
      if (std::abs(row_sum - 1.0) > row_sum_tol)
        throw std::invalid_argument("StochasticMatrix: row " + std::to_string(i + 1) +
                                    " sums to " + std::to_string(row_sum));
    }
  }

  int n_states() const { return static_cast<int>(p_.rows()); }
  const Matrix& matrix() const { return p_; }
  double operator()(int i, int j) const { return p_(i, j); }

  // Directed graph on states with an edge wherever the entry is positive.
  AdjacencyList support_graph() const {
    AdjacencyList adj(n_states());
    for (int i = 0; i < n_states(); ++i)
      for (int j = 0; j < n_states(); ++j)
        if (p_(i, j) > 0.0) adj[i].push_back(j);
    return adj;
  }

private:
  Matrix p_;
};

namespace detail {

inline std::string format_g(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", x);
  return buf;
}

}  // namespace detail

// Distribution of the time gap between consecutive observations. Supported
// on {0, 1, 2, ...}; mass at 0 means repeated reads of the same state.
class GapDistribution {
public:
  enum class Kind { binomial, poisson, geometric, table };

  static GapDistribution binomial(int n, double p) {
    if (n < 0) throw std::invalid_argument("binomial gap: n must be >= 0");
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("binomial gap: p must be in [0,1]");
    GapDistribution d(Kind::binomial);
    d.a_ = n;
    d.b_ = p;
    d.finalize();
    return d;
  }

  static GapDistribution poisson(double lambda) {
    if (!(lambda >= 0.0)) throw std::invalid_argument("poisson gap: lambda must be >= 0");
    GapDistribution d(Kind::poisson);
    d.a_ = lambda;
    d.finalize();
    return d;
  }

  // Support {1, 2, ...}: pmf(l) = p (1-p)^(l-1). No mass at zero.
  static GapDistribution geometric(double p) {
    if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("geometric gap: p must be in (0,1]");
    GapDistribution d(Kind::geometric);
    d.a_ = p;
    d.finalize();
    return d;
  }

  // Explicit finite pmf over {0, ..., len-1}; must be nonnegative and sum
  // to one within 1e-9 (exactly renormalized internally).
  static GapDistribution from_pmf(std::vector<double> pmf) {
    if (pmf.empty()) throw std::invalid_argument("pmf gap: empty table");
    double total = 0.0;
    for (double w : pmf) {
      if (!(w >= 0.0)) throw std::invalid_argument("pmf gap: negative or NaN mass");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-9)
      throw std::invalid_argument("pmf gap: masses sum to " + detail::format_g(total));
    for (double& w : pmf) w /= total;
    GapDistribution d(Kind::table);
    d.table_ = std::move(pmf);
    d.finalize();
    return d;
  }

  Kind kind() const { return kind_; }

  double pmf(int l) const {
    if (l < 0) return 0.0;
    switch (kind_) {
      case Kind::binomial: {
        const int n = static_cast<int>(a_);
        if (l > n) return 0.0;
        if (b_ == 0.0) return l == 0 ? 1.0 : 0.0;
        if (b_ == 1.0) return l == n ? 1.0 : 0.0;
        const double log_p = std::lgamma(n + 1.0) - std::lgamma(l + 1.0) -
                             std::lgamma(n - l + 1.0) + l * std::log(b_) +
                             (n - l) * std::log1p(-b_);
        return std::exp(log_p);
      }
      case Kind::poisson: {
        if (a_ == 0.0) return l == 0 ? 1.0 : 0.0;
        return std::exp(-a_ + l * std::log(a_) - std::lgamma(l + 1.0));
      }
      case Kind::geometric: {
        if (l < 1) return 0.0;
        if (a_ == 1.0) return l == 1 ? 1.0 : 0.0;
        return a_ * std::exp((l - 1) * std::log1p(-a_));
      }
      case Kind::table:
        return l < static_cast<int>(table_.size()) ? table_[l] : 0.0;
    }
    return 0.0;
  }

  // Smallest L with sum_{l=0}^{L} pmf(l) >= 1 - tail_tol.
  int truncation_length(double tail_tol) const {
    if (!(tail_tol > 0.0)) throw std::invalid_argument("truncation_length: tail_tol must be > 0");
    double cum = 0.0;
    for (int l = 0; l < kMaxSupport; ++l) {
      cum += pmf(l);
      if (cum >= 1.0 - tail_tol) return l;
    }
    throw numerical_error("truncation_length: tail mass did not fall below tolerance");
  }

  // pmf values on {0, ..., truncation_length(tail_tol)}, unnormalized.
  std::vector<double> truncated_pmf(double tail_tol) const {
    const int len = truncation_length(tail_tol);
    std::vector<double> out(len + 1);
    for (int l = 0; l <= len; ++l) out[l] = pmf(l);
    return out;
  }

  // Exact inverse-CDF draw using the precomputed cumulative table; the mass
  // beyond the table is below 1e-15 and collapses onto the last index.
  int sample(Rng& rng) const {
    const double u = rng.uniform();
    for (int l = 0; l < static_cast<int>(cdf_.size()); ++l)
      if (u < cdf_[l]) return l;
    return static_cast<int>(cdf_.size()) - 1;
  }

  double mean() const {
    double m = 0.0;
    for (int l = 1; l < static_cast<int>(cdf_.size()); ++l)
      m += l * pmf(l);
    return m;
  }

  // Canonical spelling, identical to the CLI syntax: "geometric:0.5",
  // "binomial:5,0.3", "poisson:1", "pmf:0.5,0.25,0.25".
  std::string to_string() const {
    switch (kind_) {
      case Kind::binomial:
        return "binomial:" + std::to_string(static_cast<int>(a_)) + "," + detail::format_g(b_);
      case Kind::poisson:
        return "poisson:" + detail::format_g(a_);
      case Kind::geometric:
        return "geometric:" + detail::format_g(a_);
      case Kind::table: {
        std::string s = "pmf:";
        for (std::size_t i = 0; i < table_.size(); ++i) {
          if (i > 0) s += ",";
          s += detail::format_g(table_[i]);
        }
        return s;
      }
    }
    return "";
  }

private:
  explicit GapDistribution(Kind k) : kind_(k) {}

  void finalize() {
    const int len = truncation_length(1e-15);
    cdf_.resize(len + 1);
    double cum = 0.0;
    for (int l = 0; l <= len; ++l) {
      cum += pmf(l);
      cdf_[l] = cum;
    }
  }

  static constexpr int kMaxSupport = 1 << 22;

  Kind kind_;
  double a_ = 0.0;
  double b_ = 0.0;
  std::vector<double> table_;
  std::vector<double> cdf_;
};

// Unique stationary distribution of an irreducible aperiodic chain, from the
// linear system pi^T P = pi^T with the normalization sum(pi) = 1.
inline Vector stationary_distribution(const StochasticMatrix& p) {
  const int n = p.n_states();
  const AdjacencyList adj = p.support_graph();
  if (!strongly_connected(adj))
    throw std::invalid_argument("stationary_distribution: chain is reducible");
  if (graph_period(adj) != 1)
    throw std::invalid_argument("stationary_distribution: chain is periodic with period " +
                                std::to_string(graph_period(adj)));
  Matrix a = p.matrix().transpose() - Matrix::Identity(n, n);
  a.row(n - 1).setOnes();
  Vector b = Vector::Zero(n);
  b(n - 1) = 1.0;
  Vector pi = a.fullPivLu().solve(b);
  const double residual = (p.matrix().transpose() * pi - pi).cwiseAbs().maxCoeff();
  if (!(residual <= 1e-10) || !(pi.minCoeff() > 0.0))
    throw numerical_error("stationary_distribution: solve failed, residual " +
                          detail::format_g(residual));
  pi /= pi.sum();
  return pi;
}

// Kernel of the chain observed at independent gaps: sum_l pmf(l) P^l,
// truncated once the tail mass is below tail_tol and renormalized row-wise.
inline StochasticMatrix gap_transform(const StochasticMatrix& p, const GapDistribution& mu,
                                      double tail_tol = 1e-12) {
  const int len = mu.truncation_length(tail_tol);
  const int n = p.n_states();
  Matrix q = Matrix::Zero(n, n);
  Matrix power = Matrix::Identity(n, n);
  for (int l = 0; l <= len; ++l) {
    const double w = mu.pmf(l);
    if (w > 0.0) q += w * power;
    if (l < len) power = power * p.matrix();
  }
  for (int i = 0; i < n; ++i) {
    const double row_sum = q.row(i).sum();
    if (std::abs(row_sum - 1.0) > tail_tol) q.row(i) /= row_sum;
  }
  return StochasticMatrix(std::move(q), std::max(1e-12, 10.0 * tail_tol));
}

// States of the chain at observation times: gaps are drawn up front, then
// the chain advances gap-many steps per observation. By default the first
// observation sits one gap after the initial state; observe_initial makes
// the initial state itself the first observation instead.
inline std::vector<int> simulate_subsampled(const StochasticMatrix& p, const GapDistribution& mu,
                                            int n_obs, std::optional<int> init_state,
                                            std::uint64_t seed, bool observe_initial = false) {
  const int n = p.n_states();
  if (n_obs < 2) throw std::invalid_argument("simulate_subsampled: need at least 2 observations");
  if (init_state && (*init_state < 0 || *init_state >= n))
    throw std::invalid_argument("simulate_subsampled: init_state out of range");
  Rng rng(seed);
  const int n_gaps = observe_initial ? n_obs - 1 : n_obs;
  std::vector<int> gaps(n_gaps);
  for (int k = 0; k < n_gaps; ++k) gaps[k] = mu.sample(rng);
  int x;
  if (init_state) {
    x = *init_state;
  } else {
    const Vector pi = stationary_distribution(p);
    x = rng.categorical(pi);
  }
  std::vector<int> y;
  y.reserve(n_obs);
  if (observe_initial) y.push_back(x);
  for (int k = 0; k < n_gaps; ++k) {
    for (int t = 0; t < gaps[k]; ++t) x = rng.categorical(p.matrix().row(x).transpose());
    y.push_back(x);
  }
  return y;
}

struct ConditionedSample {
  std::vector<int> states;
  int attempts = 0;
};

// Rejection sampling of whole trajectories until every state appears among
// the observations. Retry r uses seed + r, so results are reproducible and
// independent of how many retries earlier cells consumed.
inline ConditionedSample sample_until_all_states(const StochasticMatrix& p,
                                                 const GapDistribution& mu, int n_obs,
                                                 std::optional<int> init_state, std::uint64_t seed,
                                                 int max_retries = 1000,
                                                 bool observe_initial = false) {
  if (max_retries < 1) throw std::invalid_argument("sample_until_all_states: max_retries must be >= 1");
  const int n = p.n_states();
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    std::vector<int> y = simulate_subsampled(p, mu, n_obs, init_state,
                                             seed + static_cast<std::uint64_t>(attempt),
                                             observe_initial);
    std::vector<char> seen(n, 0);
    int distinct = 0;
    for (int s : y) {
      if (!seen[s]) {
        seen[s] = 1;
        ++distinct;
      }
    }
    if (distinct == n) return {std::move(y), attempt + 1};
  }
  throw retry_exhausted_error("sample_until_all_states: no trajectory visited all " +
                              std::to_string(n) + " states in " + std::to_string(max_retries) +
                              " attempts");
}

}  // namespace kunveil
