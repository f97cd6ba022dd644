// Apache License, Version 2.0, refer to LICENSE.txt
#include <gtest/gtest.h>

#include <Eigen/Dense>

#include "kunveil/linalg.hpp"
#include "kunveil/rng.hpp"
#include "test_util.hpp"

using kunveil::Matrix;
using kunveil::Vector;
using testutil::expect_near_mat;
using testutil::random_matrix;

TEST(Vec, StacksColumns) {
  Matrix a(2, 2);
  a << 1, 2, 3, 4;
  Vector v = kunveil::vec(a);
  ASSERT_EQ(v.size(), 4);
  EXPECT_DOUBLE_EQ(v(0), 1);
  EXPECT_DOUBLE_EQ(v(1), 3);
  EXPECT_DOUBLE_EQ(v(2), 2);
  EXPECT_DOUBLE_EQ(v(3), 4);
}

TEST(Vec, UnvecRoundTrip) {
  kunveil::Rng rng(11);
  for (int n = 1; n <= 6; ++n) {
    Matrix a = random_matrix(rng, n, n);
    expect_near_mat(kunveil::unvec(kunveil::vec(a)), a, 0.0, "unvec(vec(A))");
  }
}

TEST(Vec, UnvecRejectsNonSquareLength) {
  EXPECT_THROW(kunveil::unvec(Vector::Zero(6)), std::invalid_argument);
}

TEST(Kron, SwapTimesIdentityIsBlockPermutation) {
  Matrix swap(2, 2);
  swap << 0, 1, 1, 0;
  Matrix expected(4, 4);
  expected << 0, 0, 1, 0,
              0, 0, 0, 1,
              1, 0, 0, 0,
              0, 1, 0, 0;
  expect_near_mat(kunveil::kron(swap, Matrix::Identity(2, 2)), expected, 0.0, "swap x I2");
}

TEST(Kron, MixedProductProperty) {
  kunveil::Rng rng(12);
  Matrix a = random_matrix(rng, 3, 2), b = random_matrix(rng, 2, 4);
  Matrix c = random_matrix(rng, 2, 3), d = random_matrix(rng, 4, 2);
  Matrix lhs = kunveil::kron(a, b) * kunveil::kron(c, d);
  Matrix rhs = kunveil::kron(Matrix(a * c), Matrix(b * d));
  expect_near_mat(lhs, rhs, 1e-12, "(A x B)(C x D) = AC x BD");
}

TEST(Kron, IdentityFactors) {
  Matrix i6 = kunveil::kron(Matrix::Identity(2, 2), Matrix::Identity(3, 3));
  expect_near_mat(i6, Matrix::Identity(6, 6), 0.0, "I2 x I3");
}

TEST(CommutatorOp, MatchesExplicitCommutator) {
  kunveil::Rng rng(13);
  for (int n = 2; n <= 6; ++n) {
    Matrix q = random_matrix(rng, n, n);
    Matrix delta = kunveil::commutator_op(q);
    ASSERT_EQ(delta.rows(), n * n);
    ASSERT_EQ(delta.cols(), n * n);
    Matrix a = random_matrix(rng, n, n);
    Vector lhs = delta * kunveil::vec(a);
    Vector rhs = kunveil::vec(Matrix(q * a - a * q));
    EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-13) << "n=" << n;
  }
}

TEST(CommutatorOp, KroneckerFormula) {
  kunveil::Rng rng(14);
  Matrix q = random_matrix(rng, 4, 4);
  Matrix expected = kunveil::kron(Matrix::Identity(4, 4), q) -
                    kunveil::kron(Matrix(q.transpose()), Matrix::Identity(4, 4));
  expect_near_mat(kunveil::commutator_op(q), expected, 0.0, "I x Q - Q^T x I");
}

TEST(CommutatorOp, AnnihilatesPolynomialsInQ) {
  kunveil::Rng rng(15);
  Matrix q = random_matrix(rng, 5, 5);
  Matrix delta = kunveil::commutator_op(q);
  EXPECT_LE((delta * kunveil::vec(Matrix::Identity(5, 5))).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_LE((delta * kunveil::vec(q)).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_LE((delta * kunveil::vec(Matrix(q * q))).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Pinv, RankOneClosedForm) {
  Vector u(3), v(2);
  u << 1, -2, 0.5;
  v << 3, 4;
  Matrix m = u * v.transpose();
  Matrix expected = (v * u.transpose()) / (u.squaredNorm() * v.squaredNorm());
  expect_near_mat(kunveil::pinv(m), expected, 1e-14, "rank-1 pinv");
}

TEST(Pinv, InverseForFullRankSquare) {
  kunveil::Rng rng(16);
  Matrix m = random_matrix(rng, 4, 4) + 4.0 * Matrix::Identity(4, 4);
  expect_near_mat(kunveil::pinv(m), Matrix(m.inverse()), 1e-10, "pinv == inverse");
}

TEST(Pinv, MoorePenroseAxioms) {
  kunveil::Rng rng(17);
  for (int trial = 0; trial < 25; ++trial) {
    const int rows = 2 + static_cast<int>(rng.uniform() * 5);
    const int cols = 2 + static_cast<int>(rng.uniform() * 5);
    const int rank = 1 + static_cast<int>(rng.uniform() * std::min(rows, cols));
    Matrix m = random_matrix(rng, rows, rank) * random_matrix(rng, rank, cols);
    Matrix p = kunveil::pinv(m);
    expect_near_mat(m * p * m, m, 1e-10, "M P M = M");
    expect_near_mat(p * m * p, p, 1e-10, "P M P = P");
    expect_near_mat(Matrix(m * p), Matrix((m * p).transpose()), 1e-10, "M P symmetric");
    expect_near_mat(Matrix(p * m), Matrix((p * m).transpose()), 1e-10, "P M symmetric");
  }
}

TEST(Pinv, ZeroMatrixMapsToZero) {
  Matrix z = kunveil::pinv(Matrix::Zero(3, 5));
  ASSERT_EQ(z.rows(), 5);
  ASSERT_EQ(z.cols(), 3);
  EXPECT_EQ(z.cwiseAbs().maxCoeff(), 0.0);
}

TEST(NumericRank, DetectsConstructedRank) {
  kunveil::Rng rng(18);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 3 + static_cast<int>(rng.uniform() * 4);
    const int r = 1 + static_cast<int>(rng.uniform() * n);
    Matrix m = random_matrix(rng, n, r) * random_matrix(rng, r, n);
    EXPECT_EQ(kunveil::numeric_rank(m), r) << "n=" << n << " r=" << r;
  }
}

TEST(NumericRank, RespectsExplicitTolerance) {
  Matrix m = Matrix::Zero(3, 3);
  m(0, 0) = 1.0;
  m(1, 1) = 1e-6;
  EXPECT_EQ(kunveil::numeric_rank(m), 2);
  EXPECT_EQ(kunveil::numeric_rank(m, 1e-3), 1);
}

TEST(SymSqrt, SquaresBackAndStaysSymmetric) {
  kunveil::Rng rng(19);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform() * 5);
    Matrix a = random_matrix(rng, n, n);
    Matrix s = a.transpose() * a;
    Matrix r = kunveil::sym_sqrt(s);
    expect_near_mat(Matrix(r * r), s, 1e-10, "R R = S");
    expect_near_mat(r, Matrix(r.transpose()), 1e-12, "R symmetric");
  }
}

TEST(SymSqrt, SingularInputKeepsZeroEigenvalues) {
  Vector u(3);
  u << 1, 2, 2;
  Matrix s = u * u.transpose();
  Matrix r = kunveil::sym_sqrt(s);
  expect_near_mat(Matrix(r * r), s, 1e-10, "rank-1 sqrt");
  EXPECT_NEAR(kunveil::numeric_rank(r), 1, 0);
}

TEST(SymSqrt, RejectsIndefiniteAndAsymmetric) {
  Matrix neg = -Matrix::Identity(3, 3);
  EXPECT_THROW(kunveil::sym_sqrt(neg), kunveil::numerical_error);
  Matrix asym(2, 2);
  asym << 1, 2, 0, 1;
  EXPECT_THROW(kunveil::sym_sqrt(asym), kunveil::numerical_error);
}

TEST(SymSqrt, ZeroMatrixMapsToZero) {
  Matrix r = kunveil::sym_sqrt(Matrix::Zero(4, 4));
  EXPECT_EQ(r.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Rng, DeterministicStreams) {
  kunveil::Rng a(123), b(123), c(124);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 100; ++i) {
    const double ua = a.uniform(), ub = b.uniform(), uc = c.uniform();
    all_equal = all_equal && (ua == ub);
    any_diff = any_diff || (ua != uc);
    EXPECT_GE(ua, 0.0);
    EXPECT_LT(ua, 1.0);
  }
  EXPECT_TRUE(all_equal);
  EXPECT_TRUE(any_diff);
}

TEST(Rng, DeriveSeedSeparatesStreams) {
  const std::uint64_t s1 = kunveil::derive_seed(1, {2, 3});
  const std::uint64_t s2 = kunveil::derive_seed(1, {2, 4});
  const std::uint64_t s3 = kunveil::derive_seed(1, {2, 3});
  EXPECT_NE(s1, s2);
  EXPECT_EQ(s1, s3);
  EXPECT_NE(kunveil::fnv1a("geometric:0.5"), kunveil::fnv1a("poisson:1"));
}

TEST(Rng, CategoricalHitsSupportOnly) {
  kunveil::Rng rng(20);
  Vector w(4);
  w << 0.0, 0.5, 0.0, 0.5;
  for (int i = 0; i < 200; ++i) {
    const int k = rng.categorical(w);
    EXPECT_TRUE(k == 1 || k == 3);
  }
  EXPECT_THROW(rng.categorical(Vector::Zero(3)), std::invalid_argument);
}
