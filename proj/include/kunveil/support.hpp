// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <algorithm>
#include <cstdint>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "kunveil/graph.hpp"
#include "kunveil/linalg.hpp"
#include "kunveil/markov.hpp"
#include "kunveil/rng.hpp"

namespace kunveil {

// Set of index pairs where the transition matrix may be nonzero. Pairs are
// 0-based and kept sorted row-major; every row owns at least one pair, since
// otherwise no stochastic matrix has its support inside the set.
class SupportSet {
public:
  SupportSet(int n_states, std::vector<std::pair<int, int>> pairs)
      : n_(n_states), pairs_(std::move(pairs)) {
    if (n_ < 1) throw std::invalid_argument("SupportSet: n_states must be >= 1");
    std::sort(pairs_.begin(), pairs_.end());
    if (std::adjacent_find(pairs_.begin(), pairs_.end()) != pairs_.end())
      throw std::invalid_argument("SupportSet: duplicate pair");
    std::vector<char> row_has(n_, 0);
    for (const auto& [i, j] : pairs_) {
      if (i < 0 || i >= n_ || j < 0 || j >= n_)
        throw std::invalid_argument("SupportSet: pair (" + std::to_string(i + 1) + "," +
                                    std::to_string(j + 1) + ") out of range");
      row_has[i] = 1;
    }
    for (int i = 0; i < n_; ++i)
      if (!row_has[i])
        throw std::invalid_argument("SupportSet: row " + std::to_string(i + 1) +
                                    " has no support entry");
  }

  // Support inferred from the positive entries of a matrix.
  static SupportSet from_matrix(const Matrix& m, double threshold = 0.0) {
    if (m.rows() != m.cols()) throw std::invalid_argument("SupportSet: matrix must be square");
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < m.rows(); ++i)
      for (int j = 0; j < m.cols(); ++j)
        if (m(i, j) > threshold) pairs.emplace_back(i, j);
    return SupportSet(static_cast<int>(m.rows()), std::move(pairs));
  }

  int n_states() const { return n_; }
  int d() const { return static_cast<int>(pairs_.size()); }
  const std::vector<std::pair<int, int>>& pairs() const { return pairs_; }

  bool contains(int i, int j) const {
    return std::binary_search(pairs_.begin(), pairs_.end(), std::make_pair(i, j));
  }

  bool contains_full_diagonal() const {
    for (int i = 0; i < n_; ++i)
      if (!contains(i, i)) return false;
    return true;
  }

  AdjacencyList graph() const {
    AdjacencyList adj(n_);
    for (const auto& [i, j] : pairs_) adj[i].push_back(j);
    return adj;
  }

private:
  int n_;
  std::vector<std::pair<int, int>> pairs_;
};

// Parameterization of the affine space of row-stochastic matrices supported
// in S: candidate vectors are p0 + Phi * beta. Columns of Phi span the
// matrices with zero row sums and support inside S.
struct AffineChart {
  int n_states;
  SupportSet support;
  Vector p0;
  Matrix phi;

  int dim() const { return static_cast<int>(phi.cols()); }
};

// Canonical chart: p0 is row-uniform over each row's support entries; each
// non-anchor pair (i, j_m) yields a basis matrix with +1 there and -1 at the
// row's smallest support column. Column order follows the sorted pair order.
inline AffineChart build_chart(const SupportSet& s) {
  const int n = s.n_states();
  std::vector<std::vector<int>> row_cols(n);
  for (const auto& [i, j] : s.pairs()) row_cols[i].push_back(j);
  Vector p0 = Vector::Zero(n * n);
  Matrix phi = Matrix::Zero(n * n, s.d() - n);
  int col = 0;
  for (int i = 0; i < n; ++i) {
    const std::vector<int>& cols = row_cols[i];
    const double w = 1.0 / static_cast<double>(cols.size());
    for (int j : cols) p0(j * n + i) = w;
    for (std::size_t m = 1; m < cols.size(); ++m) {
      phi(cols[m] * n + i, col) = 1.0;
      phi(cols[0] * n + i, col) = -1.0;
      ++col;
    }
  }
  return {n, s, std::move(p0), std::move(phi)};
}

struct IdentifiabilityReport {
  bool identifiable = false;
  Eigen::Index rank = 0;
  Eigen::Index expected = 0;
  double min_singular_value = 0.0;
};

// Full column rank of Delta(Q) * Phi decides identifiability: the kernel of
// the commutator map meets the chart directions only at zero.
inline IdentifiabilityReport identifiability_rank_check(const StochasticMatrix& q,
                                                        const AffineChart& chart,
                                                        double rtol = 1e-8) {
  if (q.n_states() != chart.n_states)
    throw std::invalid_argument("identifiability_rank_check: dimension mismatch");
  const Matrix a = commutator_op(q.matrix()) * chart.phi;
  if (a.cols() == 0) return {true, 0, 0, 0.0};
  Eigen::BDCSVD<Matrix> svd(a);
  const Vector& s = svd.singularValues();
  const double cutoff = rtol * s(0);
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > cutoff) ++rank;
  return {rank == a.cols(), rank, a.cols(), s(s.size() - 1)};
}

// Pass/fail heuristics for the structural conditions a support set needs to
// admit an identifiable chain. Necessary directions only, not sufficiency.
struct NecessaryConditionsReport {
  bool strongly_connected = false;
  bool aperiodic = false;
  bool dimension_ok = false;
  bool diagonal_entry_absent = false;
  bool not_full_bipartite = false;

  bool all_pass() const {
    return strongly_connected && aperiodic && dimension_ok && diagonal_entry_absent &&
           not_full_bipartite;
  }
};

namespace detail {

// True when the pairs form the complete double-orientation of a bipartite
// pattern A x B: no self loops, 2-colorable, connected, and every cross pair
// present (counted as d == 2|A||B|).
inline bool is_full_bipartite_pattern(const SupportSet& s) {
  const int n = s.n_states();
  AdjacencyList undirected(n);
  for (const auto& [i, j] : s.pairs()) {
    if (i == j) return false;
    undirected[i].push_back(j);
    undirected[j].push_back(i);
  }
  std::vector<int> color(n, -1);
  std::queue<int> q;
  color[0] = 0;
  q.push(0);
  int reached = 1;
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    for (int v : undirected[u]) {
      if (color[v] < 0) {
        color[v] = 1 - color[u];
        ++reached;
        q.push(v);
      } else if (color[v] == color[u]) {
        return false;
      }
    }
  }
  if (reached < n) return false;
  long long a = std::count(color.begin(), color.end(), 0);
  long long b = n - a;
  return static_cast<long long>(s.d()) == 2 * a * b;
}

}  // namespace detail

inline NecessaryConditionsReport necessary_conditions_report(const SupportSet& s) {
  NecessaryConditionsReport r;
  const AdjacencyList adj = s.graph();
  r.strongly_connected = strongly_connected(adj);
  r.aperiodic = r.strongly_connected && graph_period(adj) == 1;
  r.dimension_ok = s.d() <= s.n_states() * (s.n_states() - 1);
  r.diagonal_entry_absent = !s.contains_full_diagonal();
  r.not_full_bipartite = !detail::is_full_bipartite_pattern(s);
  return r;
}

// Fraction of random positive-entry matrices in the chart whose transformed
// kernel passes the rank check. The identifiable set is dense open or empty,
// so the fraction should sit at 0 or 1 except on razor-edge supports.
inline double randomized_genericity_probe(const SupportSet& s, const GapDistribution& mu,
                                          int trials, std::uint64_t seed, double rtol = 1e-8,
                                          double tail_tol = 1e-12) {
  if (trials < 1) throw std::invalid_argument("randomized_genericity_probe: trials must be >= 1");
  const AffineChart chart = build_chart(s);
  const int n = s.n_states();
  int pass = 0;
  for (int t = 0; t < trials; ++t) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(t)}));
    Matrix a = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      double row_sum = 0.0;
      for (const auto& [pi, pj] : s.pairs())
        if (pi == i) {
          a(pi, pj) = rng.exponential();
          row_sum += a(pi, pj);
        }
      for (int j = 0; j < n; ++j) a(i, j) /= row_sum;
    }
    const StochasticMatrix q = gap_transform(StochasticMatrix(a), mu, tail_tol);
    if (identifiability_rank_check(q, chart, rtol).identifiable) ++pass;
  }
  return static_cast<double>(pass) / static_cast<double>(trials);
}

}  // namespace kunveil
