// Apache License, Version 2.0, refer to LICENSE.txt
#include <gtest/gtest.h>

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "kunveil/montecarlo.hpp"
#include "kunveil/support.hpp"
#include "test_util.hpp"

using kunveil::AffineChart;
using kunveil::GapDistribution;
using kunveil::Matrix;
using kunveil::StochasticMatrix;
using kunveil::SupportSet;
using kunveil::Vector;

namespace {

using Pairs = std::vector<std::pair<int, int>>;

Pairs all_pairs(int n, bool with_diagonal) {
  Pairs out;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (with_diagonal || i != j) out.emplace_back(i, j);
  return out;
}

SupportSet full_bipartite_support() {
  Pairs pairs;
  for (int a : {0, 1})
    for (int b : {2, 3}) {
      pairs.emplace_back(a, b);
      pairs.emplace_back(b, a);
    }
  return SupportSet(4, pairs);
}

StochasticMatrix random_member(kunveil::Rng& rng, const SupportSet& s) {
  Eigen::MatrixXi mask = Eigen::MatrixXi::Zero(s.n_states(), s.n_states());
  for (const auto& [i, j] : s.pairs()) mask(i, j) = 1;
  return StochasticMatrix(testutil::random_stochastic(rng, mask));
}

}  // namespace

TEST(SupportSet, Validation) {
  EXPECT_NO_THROW(SupportSet(2, {{0, 0}, {0, 1}, {1, 0}}));
  EXPECT_THROW(SupportSet(2, {{0, 0}, {0, 0}, {1, 1}}), std::invalid_argument);
  EXPECT_THROW(SupportSet(2, {{0, 2}, {1, 1}}), std::invalid_argument);
  EXPECT_THROW(SupportSet(3, {{0, 0}, {1, 1}}), std::invalid_argument);  // row 3 empty
}

TEST(SupportSet, FromMatrixAndContains) {
  const auto examples = kunveil::builtin_examples();
  const SupportSet s = SupportSet::from_matrix(examples[0].P.matrix());
  EXPECT_EQ(s.n_states(), 5);
  EXPECT_EQ(s.d(), 16);
  EXPECT_TRUE(s.contains(0, 1));
  EXPECT_FALSE(s.contains(0, 0));
  EXPECT_FALSE(s.contains_full_diagonal());
  EXPECT_TRUE(SupportSet(2, all_pairs(2, true)).contains_full_diagonal());
}

TEST(BuildChart, FullTwoByTwo) {
  const AffineChart chart = kunveil::build_chart(SupportSet(2, all_pairs(2, true)));
  Vector p0_expected(4);
  p0_expected << 0.5, 0.5, 0.5, 0.5;
  EXPECT_EQ(chart.dim(), 2);
  EXPECT_LE((chart.p0 - p0_expected).cwiseAbs().maxCoeff(), 0.0);
  // row 1 basis: +1 at (1,2) [vec 2], -1 at (1,1) [vec 0]
  EXPECT_EQ(chart.phi(2, 0), 1.0);
  EXPECT_EQ(chart.phi(0, 0), -1.0);
  // row 2 basis: +1 at (2,2) [vec 3], -1 at (2,1) [vec 1]
  EXPECT_EQ(chart.phi(3, 1), 1.0);
  EXPECT_EQ(chart.phi(1, 1), -1.0);
}

TEST(BuildChart, AnchorIsSmallestColumn) {
  // row 1 support {2,5} (1-based); remaining rows pinned to one entry each
  Pairs pairs = {{0, 1}, {0, 4}, {1, 0}, {2, 0}, {3, 0}, {4, 0}};
  const AffineChart chart = kunveil::build_chart(SupportSet(5, pairs));
  ASSERT_EQ(chart.dim(), 1);
  Matrix basis = kunveil::unvec(chart.phi.col(0));
  EXPECT_EQ(basis(0, 4), 1.0);
  EXPECT_EQ(basis(0, 1), -1.0);
  EXPECT_EQ(basis.cwiseAbs().sum(), 2.0);
}

TEST(BuildChart, BenchmarkSupportShapes) {
  const auto examples = kunveil::builtin_examples();
  const AffineChart chart = kunveil::build_chart(examples[0].support);
  EXPECT_EQ(chart.phi.rows(), 25);
  EXPECT_EQ(chart.phi.cols(), 11);
  EXPECT_EQ(kunveil::numeric_rank(chart.phi), 11);
  EXPECT_EQ(kunveil::build_chart(examples[1].support).dim(), 9);
  EXPECT_EQ(kunveil::build_chart(examples[2].support).dim(), 8);
}

TEST(BuildChart, MembersStayInAffineSpace) {
  kunveil::Rng rng(22);
  const auto examples = kunveil::builtin_examples();
  for (const auto& cfg : examples) {
    const AffineChart chart = kunveil::build_chart(cfg.support);
    EXPECT_EQ(kunveil::numeric_rank(chart.phi), chart.dim());
    for (int trial = 0; trial < 100; ++trial) {
      Vector beta(chart.dim());
      for (int k = 0; k < chart.dim(); ++k) beta(k) = 4.0 * rng.uniform() - 2.0;
      const Matrix member = kunveil::unvec(chart.p0 + chart.phi * beta);
      for (int i = 0; i < chart.n_states; ++i) {
        EXPECT_NEAR(member.row(i).sum(), 1.0, 1e-12);
        for (int j = 0; j < chart.n_states; ++j)
          if (!cfg.support.contains(i, j)) EXPECT_EQ(member(i, j), 0.0);
      }
    }
  }
}

TEST(BuildChart, ZeroDimensionalChart) {
  const AffineChart chart = kunveil::build_chart(SupportSet(3, {{0, 1}, {1, 2}, {2, 0}}));
  EXPECT_EQ(chart.dim(), 0);
  Matrix p0 = kunveil::unvec(chart.p0);
  EXPECT_EQ(p0(0, 1), 1.0);
  EXPECT_EQ(p0(1, 2), 1.0);
  EXPECT_EQ(p0(2, 0), 1.0);
}

TEST(Identifiability, BenchmarkSupportsWithExactKernels) {
  kunveil::Rng rng(23);
  const auto examples = kunveil::builtin_examples();
  for (const auto& cfg : examples) {
    const AffineChart chart = kunveil::build_chart(cfg.support);
    const StochasticMatrix q = kunveil::gap_transform(cfg.P, GapDistribution::poisson(1.0), 1e-12);
    const auto report = kunveil::identifiability_rank_check(q, chart);
    EXPECT_TRUE(report.identifiable) << cfg.name;
    EXPECT_EQ(report.rank, chart.dim()) << cfg.name;
    EXPECT_EQ(report.expected, chart.dim()) << cfg.name;
    EXPECT_GT(report.min_singular_value, 0.0) << cfg.name;
  }
}

TEST(Identifiability, DiagonalObstruction) {
  kunveil::Rng rng(24);
  const SupportSet s(3, all_pairs(3, true));
  const AffineChart chart = kunveil::build_chart(s);
  for (int trial = 0; trial < 5; ++trial) {
    const StochasticMatrix p = random_member(rng, s);
    const StochasticMatrix q = kunveil::gap_transform(p, GapDistribution::poisson(1.0), 1e-12);
    EXPECT_FALSE(kunveil::identifiability_rank_check(q, chart).identifiable);
  }
}

TEST(Identifiability, DimensionObstruction) {
  // d = 8 > N(N-1) = 6: the chart directions always meet the commutant
  kunveil::Rng rng(25);
  Pairs pairs = all_pairs(3, true);
  pairs.erase(pairs.begin());  // drop (0,0)
  const SupportSet s(3, pairs);
  const AffineChart chart = kunveil::build_chart(s);
  for (int trial = 0; trial < 5; ++trial) {
    const StochasticMatrix p = random_member(rng, s);
    const StochasticMatrix q = kunveil::gap_transform(p, GapDistribution::poisson(1.0), 1e-12);
    EXPECT_FALSE(kunveil::identifiability_rank_check(q, chart).identifiable);
  }
}

TEST(Identifiability, ZeroDimensionalChartIsIdentifiable) {
  const SupportSet s(3, {{0, 1}, {1, 2}, {2, 0}});
  const AffineChart chart = kunveil::build_chart(s);
  const auto report =
      kunveil::identifiability_rank_check(kunveil::gap_transform(StochasticMatrix(kunveil::unvec(chart.p0)),
                                                                 GapDistribution::poisson(1.0), 1e-12),
                                          chart);
  EXPECT_TRUE(report.identifiable);
  EXPECT_EQ(report.expected, 0);
}

TEST(Identifiability, InvariantToChartChoice) {
  kunveil::Rng rng(26);
  const auto examples = kunveil::builtin_examples();
  const SupportSet& s = examples[2].support;
  const AffineChart chart = kunveil::build_chart(s);
  // alternative chart: shifted base point, mixed basis
  Matrix r = testutil::random_matrix(rng, chart.dim(), chart.dim()) +
             3.0 * Matrix::Identity(chart.dim(), chart.dim());
  Vector gamma = testutil::random_matrix(rng, chart.dim(), 1).col(0);
  const AffineChart other{chart.n_states, s, chart.p0 + chart.phi * gamma,
                          Matrix(chart.phi * r)};
  const StochasticMatrix q =
      kunveil::gap_transform(examples[2].P, GapDistribution::geometric(0.5), 1e-12);
  const auto a = kunveil::identifiability_rank_check(q, chart);
  const auto b = kunveil::identifiability_rank_check(q, other);
  EXPECT_EQ(a.identifiable, b.identifiable);
  EXPECT_EQ(a.rank, b.rank);
}

TEST(NecessaryConditions, FlagsObstructions) {
  const auto diag_report = kunveil::necessary_conditions_report(SupportSet(3, all_pairs(3, true)));
  EXPECT_FALSE(diag_report.diagonal_entry_absent);
  EXPECT_TRUE(diag_report.strongly_connected);
  EXPECT_FALSE(diag_report.all_pass());

  const auto bip_report = kunveil::necessary_conditions_report(full_bipartite_support());
  EXPECT_FALSE(bip_report.not_full_bipartite);
  EXPECT_FALSE(bip_report.aperiodic);

  Pairs too_dense = all_pairs(3, true);
  too_dense.erase(too_dense.begin());
  EXPECT_FALSE(kunveil::necessary_conditions_report(SupportSet(3, too_dense)).dimension_ok);
}

TEST(NecessaryConditions, BenchmarkSupports) {
  const auto examples = kunveil::builtin_examples();

  const auto r1 = kunveil::necessary_conditions_report(examples[0].support);
  EXPECT_TRUE(r1.all_pass());

  // tridiagonal with zero diagonal: period 2, but not a full bipartite pattern
  const auto r2 = kunveil::necessary_conditions_report(examples[1].support);
  EXPECT_TRUE(r2.strongly_connected);
  EXPECT_FALSE(r2.aperiodic);
  EXPECT_TRUE(r2.dimension_ok);
  EXPECT_TRUE(r2.diagonal_entry_absent);
  EXPECT_TRUE(r2.not_full_bipartite);
  EXPECT_FALSE(r2.all_pass());

  const auto r3 = kunveil::necessary_conditions_report(examples[2].support);
  EXPECT_TRUE(r3.all_pass());
}

TEST(GenericityProbe, DichotomyOnKnownSupports) {
  const auto examples = kunveil::builtin_examples();
  const GapDistribution mu = GapDistribution::poisson(1.0);

  EXPECT_EQ(kunveil::randomized_genericity_probe(SupportSet(3, all_pairs(3, true)), mu, 40, 1),
            0.0);
  EXPECT_EQ(kunveil::randomized_genericity_probe(full_bipartite_support(), mu, 40, 2), 0.0);
  EXPECT_EQ(kunveil::randomized_genericity_probe(examples[0].support, mu, 40, 3), 1.0);
  EXPECT_EQ(kunveil::randomized_genericity_probe(examples[1].support, mu, 40, 4), 1.0);
  EXPECT_EQ(kunveil::randomized_genericity_probe(examples[2].support, mu, 40, 5), 1.0);
  EXPECT_THROW(kunveil::randomized_genericity_probe(examples[0].support, mu, 0, 1),
               std::invalid_argument);
}
