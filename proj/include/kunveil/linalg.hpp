// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>

#include "kunveil/errors.hpp"

namespace kunveil {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Column-major stacking: vec(A)((j)*rows + i) = A(i, j).
inline Vector vec(const Matrix& a) {
  return Eigen::Map<const Vector>(a.data(), a.size());
}

// Inverse of vec for a square matrix; v.size() must be a perfect square.
inline Matrix unvec(const Vector& v) {
  const auto n = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(v.size()))));
  if (n * n != v.size()) throw std::invalid_argument("unvec: length is not a perfect square");
  return Eigen::Map<const Matrix>(v.data(), n, n);
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// Matrix of A |-> vec(QA - AQ) acting on vec(A): I (x) Q - Q^T (x) I.
inline Matrix commutator_op(const Matrix& q) {
  if (q.rows() != q.cols()) throw std::invalid_argument("commutator_op: matrix must be square");
  const Eigen::Index n = q.rows();
  Matrix out = Matrix::Zero(n * n, n * n);
  for (Eigen::Index j = 0; j < n; ++j) out.block(j * n, j * n, n, n) = q;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      out.block(i * n, j * n, n, n).diagonal().array() -= q(j, i);
  return out;
}

// Default relative cutoff for treating a singular value as zero:
// eps * max(rows, cols), relative to the largest singular value.
inline double default_sv_rtol(Eigen::Index rows, Eigen::Index cols) {
  return std::numeric_limits<double>::epsilon() * static_cast<double>(std::max(rows, cols));
}

// Moore-Penrose pseudoinverse via SVD. rtol < 0 selects the default cutoff.
inline Matrix pinv(const Matrix& m, double rtol = -1.0) {
  if (m.size() == 0) return Matrix(m.cols(), m.rows());
  if (rtol < 0.0) rtol = default_sv_rtol(m.rows(), m.cols());
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double cutoff = rtol * (s.size() > 0 ? s(0) : 0.0);
  Vector sinv = Vector::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > cutoff && s(i) > 0.0) sinv(i) = 1.0 / s(i);
  return svd.matrixV() * sinv.asDiagonal() * svd.matrixU().transpose();
}

// Count of singular values above rtol * sigma_max. rtol < 0: default cutoff.
inline Eigen::Index numeric_rank(const Matrix& m, double rtol = -1.0) {
  if (m.size() == 0) return 0;
  if (rtol < 0.0) rtol = default_sv_rtol(m.rows(), m.cols());
  Eigen::BDCSVD<Matrix> svd(m);
  const Vector& s = svd.singularValues();
  if (s.size() == 0 || s(0) <= 0.0) return 0;
  const double cutoff = rtol * s(0);
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > cutoff) ++r;
  return r;
}

// Symmetric positive-semidefinite square root. Eigenvalues in
// [-psd_tol * lambda_max, 0) are clipped to zero; anything lower throws.
inline Matrix sym_sqrt(const Matrix& m, double psd_tol = 1e-10) {
  if (m.rows() != m.cols()) throw std::invalid_argument("sym_sqrt: matrix must be square");
  if (m.size() == 0) return m;
  const double scale = m.cwiseAbs().maxCoeff();
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (scale > 0.0 && asym > 1e-10 * scale)
    throw numerical_error("sym_sqrt: matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()));
  if (es.info() != Eigen::Success) throw numerical_error("sym_sqrt: eigendecomposition failed");
  Vector lam = es.eigenvalues();
  const double lmax = lam.size() > 0 ? std::max(lam.maxCoeff(), 0.0) : 0.0;
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    if (lam(i) < -psd_tol * lmax)
      throw numerical_error("sym_sqrt: matrix is not positive semidefinite");
    lam(i) = lam(i) > 0.0 ? std::sqrt(lam(i)) : 0.0;
  }
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace kunveil
