// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "kunveil/errors.hpp"
#include "kunveil/linalg.hpp"
#include "kunveil/markov.hpp"
#include "kunveil/support.hpp"

namespace kunveil {

struct EmpiricalKernel {
  StochasticMatrix Q_hat;
  Vector pi_hat;
  std::vector<long long> visit_counts;
  int n = 0;
};

// Transition frequencies of the observation sequence. Every state must make
// at least one observed transition, i.e. appear among the first n-1 entries.
inline EmpiricalKernel empirical_kernel(const std::vector<int>& y, int n_states) {
  const int n = static_cast<int>(y.size());
  if (n < 2) throw std::invalid_argument("empirical_kernel: need at least 2 observations");
  for (int s : y)
    if (s < 0 || s >= n_states)
      throw std::invalid_argument("empirical_kernel: state index " + std::to_string(s + 1) +
                                  " out of range 1.." + std::to_string(n_states));
  Matrix counts = Matrix::Zero(n_states, n_states);
  Vector row_total = Vector::Zero(n_states);
  std::vector<long long> visits(n_states, 0);
  for (int k = 0; k + 1 < n; ++k) {
    counts(y[k], y[k + 1]) += 1.0;
    row_total(y[k]) += 1.0;
  }
  for (int s : y) ++visits[s];
  Matrix q = Matrix::Zero(n_states, n_states);
  for (int i = 0; i < n_states; ++i) {
    if (row_total(i) == 0.0)
      throw unvisited_state_error("empirical_kernel: state " + std::to_string(i + 1) +
                                      " has no observed outgoing transition",
                                  i);
    q.row(i) = counts.row(i) / row_total(i);
  }
  Vector pi(n_states);
  for (int i = 0; i < n_states; ++i) pi(i) = static_cast<double>(visits[i]) / n;
  return {StochasticMatrix(std::move(q)), std::move(pi), std::move(visits), n};
}

// Asymptotic covariance of vec(Q_hat): within row-block i the (j,l) entry is
// Q_ij (1 - Q_ij) / pi_i on the diagonal and -Q_ij Q_il / pi_i off it; blocks
// for distinct rows are independent, hence zero.
inline Matrix sigma_matrix(const StochasticMatrix& q, const Vector& pi) {
  const int n = q.n_states();
  if (pi.size() != n) throw std::invalid_argument("sigma_matrix: pi has wrong length");
  for (int i = 0; i < n; ++i)
    if (!(pi(i) > 0.0))
      throw std::invalid_argument("sigma_matrix: pi must be strictly positive (entry " +
                                  std::to_string(i + 1) + ")");
  if (std::abs(pi.sum() - 1.0) > 1e-8)
    throw std::invalid_argument("sigma_matrix: pi must sum to 1");
  Matrix sig = Matrix::Zero(n * n, n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int l = 0; l < n; ++l)
        sig(j * n + i, l * n + i) =
            (j == l ? q(i, j) * (1.0 - q(i, j)) : -q(i, j) * q(i, l)) / pi(i);
  return sig;
}

struct EstimatorDiagnostics {
  Eigen::Index rank = 0;
  double condition_number = 1.0;
  bool used_pseudoinverse = false;
  bool projection_failed = false;
  std::optional<bool> omega_admissible;
};

struct EstimateReport {
  Vector p_hat;
  Vector beta_hat;
  std::optional<StochasticMatrix> p_hat_projected;
  std::optional<Vector> p_hat_omega;
  EstimatorDiagnostics diagnostics;

  Matrix P_hat() const { return unvec(p_hat); }
};

// Negatives clamped to zero, rows rescaled to sum 1. A row that clamps to
// all zeros has no meaningful rescaling and raises instead.
inline StochasticMatrix project_stochastic(const Vector& p_hat, const SupportSet& s) {
  const int n = s.n_states();
  if (p_hat.size() != static_cast<Eigen::Index>(n) * n)
    throw std::invalid_argument("project_stochastic: vector length does not match support");
  Matrix m = unvec(p_hat);
  for (int i = 0; i < n; ++i) {
    if (std::abs(m.row(i).sum() - 1.0) > 1e-6)
      throw std::invalid_argument("project_stochastic: row " + std::to_string(i + 1) +
                                  " does not sum to 1");
    double row_sum = 0.0;
    for (int j = 0; j < n; ++j) {
      if (m(i, j) < 0.0) m(i, j) = 0.0;
      row_sum += m(i, j);
    }
    if (row_sum <= 0.0)
      throw numerical_error("project_stochastic: row " + std::to_string(i + 1) +
                            " is entirely nonpositive");
    m.row(i) /= row_sum;
  }
  return StochasticMatrix(std::move(m));
}

namespace detail {

struct LeastSquaresPieces {
  Vector beta;
  Eigen::Index rank = 0;
  double rcond_normal = 1.0;
  bool used_pseudoinverse = false;
};

// Minimizer of ||A beta + b||^2. When the normal matrix A^T A is invertible
// (reciprocal condition >= tol) this is the unique least-squares solution;
// otherwise the minimum-norm solution via the pseudoinverse, flagged.
inline LeastSquaresPieces solve_least_squares(const Matrix& a, const Vector& b, double tol) {
  LeastSquaresPieces out;
  if (a.cols() == 0) {
    out.beta = Vector(0);
    return out;
  }
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double smax = s(0);
  const double smin = s(s.size() - 1);
  const double cutoff = default_sv_rtol(a.rows(), a.cols()) * smax;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > cutoff) ++out.rank;
  out.rcond_normal = smax > 0.0 ? (smin / smax) * (smin / smax) : 0.0;
  if (out.rcond_normal >= tol) {
    out.beta = svd.solve(-b);
  } else {
    out.used_pseudoinverse = true;
    Vector sinv = Vector::Zero(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i)
      if (s(i) > cutoff) sinv(i) = 1.0 / s(i);
    out.beta = -(svd.matrixV() * sinv.asDiagonal() * (svd.matrixU().transpose() * b));
  }
  return out;
}

inline void attach_projection(EstimateReport& r, const SupportSet& s) {
  try {
    r.p_hat_projected = project_stochastic(r.p_hat, s);
  } catch (const numerical_error&) {
    r.diagnostics.projection_failed = true;
  }
}

}  // namespace detail

// Commutator least squares on the chart: beta minimizes
// ||Delta(Q_hat) (p0 + Phi beta)||^2, estimate is p0 + Phi beta.
inline EstimateReport estimate(const StochasticMatrix& q_hat, const AffineChart& chart,
                               double tol = 1e-10) {
  if (q_hat.n_states() != chart.n_states)
    throw std::invalid_argument("estimate: kernel and chart dimensions differ");
  const Matrix delta = commutator_op(q_hat.matrix());
  const Matrix a = delta * chart.phi;
  const Vector b = delta * chart.p0;
  const detail::LeastSquaresPieces ls = detail::solve_least_squares(a, b, tol);
  EstimateReport r;
  r.beta_hat = ls.beta;
  r.p_hat = chart.p0 + chart.phi * ls.beta;
  r.diagnostics.rank = ls.rank;
  r.diagnostics.condition_number =
      ls.rcond_normal > 0.0 ? 1.0 / ls.rcond_normal : std::numeric_limits<double>::infinity();
  r.diagnostics.used_pseudoinverse = ls.used_pseudoinverse;
  detail::attach_projection(r, chart.support);
  return r;
}

// Weighted variant: beta minimizes ||Omega Delta(Q_hat) (p0 + Phi beta)||^2.
// The weighting must keep the normal matrix invertible; there is no
// pseudoinverse fallback here because an inadmissible Omega means the
// weighted objective no longer identifies beta.
inline EstimateReport estimate_weighted(const StochasticMatrix& q_hat, const AffineChart& chart,
                                        const Matrix& omega, double tol = 1e-10) {
  const int n = chart.n_states;
  if (q_hat.n_states() != n)
    throw std::invalid_argument("estimate_weighted: kernel and chart dimensions differ");
  if (omega.cols() != static_cast<Eigen::Index>(n) * n)
    throw std::invalid_argument("estimate_weighted: Omega must have N^2 columns");
  const Matrix delta = commutator_op(q_hat.matrix());
  const Matrix a = omega * (delta * chart.phi);
  const Vector b = omega * (delta * chart.p0);
  EstimateReport r;
  if (a.cols() == 0) {
    r.beta_hat = Vector(0);
    r.p_hat = chart.p0;
    detail::attach_projection(r, chart.support);
    return r;
  }
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double smax = s(0);
  const double smin = s(s.size() - 1);
  const double rcond_normal = smax > 0.0 ? (smin / smax) * (smin / smax) : 0.0;
  if (!(rcond_normal >= tol))
    throw numerical_error("estimate_weighted: weighting is not admissible, normal matrix "
                          "reciprocal condition " +
                          detail::format_g(rcond_normal));
  r.beta_hat = svd.solve(-b);
  r.p_hat = chart.p0 + chart.phi * r.beta_hat;
  const double cutoff = default_sv_rtol(a.rows(), a.cols()) * smax;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > cutoff) ++r.diagnostics.rank;
  r.diagnostics.condition_number = 1.0 / rcond_normal;
  detail::attach_projection(r, chart.support);
  return r;
}

// Weighting whose square reproduces the pseudoinverse of the commutator
// image of the plug-in covariance. Zero covariance collapses to Omega = 0,
// which downstream admissibility checks reject. The default rank threshold
// is looser than the raw SVD default because the triple product carries
// rounding noise well above eps * sigma_max; 1e-8 matches the relative
// threshold used for identifiability rank decisions.
inline Matrix optimal_omega(const Matrix& p_hat, const Matrix& sigma_hat, double tol = 1e-8) {
  if (p_hat.rows() != p_hat.cols()) throw std::invalid_argument("optimal_omega: P must be square");
  const Eigen::Index nn = p_hat.rows() * p_hat.rows();
  if (sigma_hat.rows() != nn || sigma_hat.cols() != nn)
    throw std::invalid_argument("optimal_omega: Sigma must be N^2 x N^2");
  const Matrix delta = commutator_op(p_hat);
  const Matrix w = pinv(Matrix(delta * sigma_hat * delta.transpose()), tol);
  // fresh matrix: assigning w + w^T back into w would alias
  const Matrix w_sym = 0.5 * (w + w.transpose());
  return sym_sqrt(w_sym);
}

// Plug-in two-step: plain estimate, then covariance-weighted re-estimate
// with the optimal weighting built from the first pass. An inadmissible
// weighting leaves only the plain estimate, flagged.
inline EstimateReport two_step_from_kernel(const EmpiricalKernel& kernel, const AffineChart& chart,
                                           double tol = 1e-10) {
  EstimateReport r = estimate(kernel.Q_hat, chart, tol);
  try {
    const Matrix sigma = sigma_matrix(kernel.Q_hat, kernel.pi_hat);
    const Matrix omega = optimal_omega(unvec(r.p_hat), sigma);
    const EstimateReport weighted = estimate_weighted(kernel.Q_hat, chart, omega, tol);
    r.p_hat_omega = weighted.p_hat;
    r.diagnostics.omega_admissible = true;
  } catch (const numerical_error&) {
    r.diagnostics.omega_admissible = false;
  }
  return r;
}

inline EstimateReport two_step_estimate(const std::vector<int>& y, const SupportSet& s,
                                        double tol = 1e-10) {
  return two_step_from_kernel(empirical_kernel(y, s.n_states()), build_chart(s), tol);
}

struct AsymptoticCovariance {
  Matrix sigma;
  Matrix b;
  Matrix limit_cov;
};

// Delta-method sensitivity B (or B(Omega)) and the limit covariance of the
// scaled estimation error, B Sigma B^T.
inline AsymptoticCovariance asymptotic_covariance(const StochasticMatrix& p,
                                                  const StochasticMatrix& q, const Matrix& sigma,
                                                  const AffineChart& chart,
                                                  const std::optional<Matrix>& omega = std::nullopt,
                                                  double tol = 1e-10) {
  const int n = chart.n_states;
  const Eigen::Index nn = static_cast<Eigen::Index>(n) * n;
  if (p.n_states() != n || q.n_states() != n || sigma.rows() != nn || sigma.cols() != nn)
    throw std::invalid_argument("asymptotic_covariance: dimension mismatch");
  if (chart.dim() == 0) {
    return {sigma, Matrix::Zero(nn, nn), Matrix::Zero(nn, nn)};
  }
  const Matrix dq = commutator_op(q.matrix());
  const Matrix dp = commutator_op(p.matrix());
  Matrix k = dq.transpose();
  if (omega) {
    if (omega->cols() != nn)
      throw std::invalid_argument("asymptotic_covariance: Omega must have N^2 columns");
    k = dq.transpose() * (omega->transpose() * *omega);
  }
  const Matrix g = chart.phi.transpose() * k * dq * chart.phi;
  Eigen::JacobiSVD<Matrix> svd(g, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double rcond = s(0) > 0.0 ? s(s.size() - 1) / s(0) : 0.0;
  if (!(rcond >= tol))
    throw numerical_error("asymptotic_covariance: normal matrix is singular, rcond " +
                          detail::format_g(rcond));
  const Matrix ginv = svd.solve(Matrix::Identity(g.rows(), g.cols()));
  const Matrix b = chart.phi * ginv * chart.phi.transpose() * k * dp;
  return {sigma, b, b * sigma * b.transpose()};
}

}  // namespace kunveil
