#include "mixcs/ensembles.hpp"
#include "mixcs/solvers.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace mixcs;

namespace {

double exhaustive_objective(const VectorXd& y, const MatrixXd& m, Index s) {
  const Index n = m.cols();
  double best = std::numeric_limits<double>::infinity();
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    if (static_cast<Index>(std::popcount(mask)) != s) continue;
    std::vector<Index> support;
    for (Index i = 0; i < n; ++i)
      if (mask >> i & 1u) support.push_back(i);
    best = std::min(best, (y - m * least_squares_on_support(y, m, support)).squaredNorm());
  }
  return best;
}

}  // namespace

TEST(SolveLasso, FullSubspaceInvertsSquareSystem) {
  Rng rng(1);
  const MatrixXd m = gaussian_matrix(rng, 6, 6);
  const VectorXd x = gaussian_vector(rng, 6);
  const SolveReport r = solve_lasso(m * x, m, make_subspace(MatrixXd::Identity(6, 6)), {});
  EXPECT_LE((r.xhat - x).norm(), 1e-10 * x.norm());
  EXPECT_LE(r.objective, 1e-20);
  EXPECT_EQ(r.strategy, SolveStrategy::SubspaceLeastSquares);
  EXPECT_EQ(r.gap_upper, 0.0);
}

TEST(SolveLasso, UnionNoiselessRecovery) {
  Rng rng(2);
  std::vector<MatrixXd> bases = {random_orthonormal_basis(rng, 20, 3), random_orthonormal_basis(rng, 20, 3)};
  const auto set = make_union(bases);
  for (int t = 0; t < 20; ++t) {
    const MatrixXd m = gaussian_matrix(rng, 12, 20);
    const VectorXd x = bases[t % 2] * gaussian_vector(rng, 3);
    const SolveReport r = solve_lasso(m * x, m, set, {});
    EXPECT_LE((r.xhat - x).norm(), 1e-8 * x.norm());
    EXPECT_TRUE(r.gap_certified);
  }
}

TEST(SolveLasso, SparseMatchesExhaustiveOracle) {
  const Index n = 10, s = 2, m = 8;
  const auto set = make_sparse_cone(n, s);
  int matches = 0;
  for (int t = 0; t < 100; ++t) {
    Rng rng(derive_seed(3, t));
    const MatrixXd a = sample_A(RowDistribution{RowKind::Gaussian}, m, n, derive_seed(4, t));
    const VectorXd x = sample_point(set, rng, true);
    const VectorXd y = a * x;
    SolveOptions opts;
    opts.seed = derive_seed(5, t);
    const SolveReport r = solve_lasso(y, a, set, opts);
    const double oracle = exhaustive_objective(y, a, s);
    EXPECT_GE(r.objective, oracle - 1e-12 * y.squaredNorm());
    EXPECT_TRUE(r.gap_certified);
    EXPECT_NEAR(r.gap_upper, std::max(0.0, r.objective - oracle), 1e-12 * y.squaredNorm());
    if (r.objective - oracle <= 1e-8 * std::max(oracle, y.squaredNorm())) ++matches;
  }
  EXPECT_GE(matches, 95);
}

TEST(SolveLasso, OracleEquivalenceWhenWellSampled) {
  int total = 0, matches = 0;
  for (int t = 0; t < 60; ++t) {
    Rng rng(derive_seed(6, t));
    const Index n = std::uniform_int_distribution<Index>(6, 12)(rng);
    const Index s = std::uniform_int_distribution<Index>(1, 3)(rng);
    const Index m = static_cast<Index>(std::ceil(4.0 * s * std::log(static_cast<double>(n) / s))) + 1;
    const auto set = make_sparse_cone(n, s);
    const MatrixXd a = gaussian_matrix(rng, m, n);
    const VectorXd y = a * sample_point(set, rng, true) + 0.05 * random_unit_vector(rng, m);
    SolveOptions opts;
    opts.seed = derive_seed(7, t);
    const SolveReport r = solve_lasso(y, a, set, opts);
    const double oracle = exhaustive_objective(y, a, s);
    EXPECT_GE(r.objective, oracle * (1.0 - 1e-12));
    ++total;
    if (r.objective - oracle <= 1e-8 * oracle) ++matches;
  }
  EXPECT_GE(matches, static_cast<int>(std::ceil(0.95 * total)));
}

TEST(SolveLasso, IhtObjectiveIsNonincreasing) {
  Rng rng(8);
  const auto set = make_sparse_cone(40, 4);
  for (int t = 0; t < 10; ++t) {
    const MatrixXd a = gaussian_matrix(rng, 25, 40);
    const VectorXd y = a * sample_point(set, rng, true) + 0.1 * random_unit_vector(rng, 25);
    const SolveReport r = solve_lasso(y, a, set, {});
    for (std::size_t i = 1; i < r.objective_trace.size(); ++i)
      EXPECT_LE(r.objective_trace[i], r.objective_trace[i - 1] + 1e-12);
    EXPECT_FALSE(r.gap_certified);
  }
}

TEST(SolveLasso, FeasibleOutputs) {
  Rng rng(9);
  const auto sparse = make_sparse_cone(15, 3);
  const auto sub = make_subspace(random_orthonormal_basis(rng, 15, 4));
  for (const auto* set : {&sparse, &sub}) {
    const MatrixXd a = gaussian_matrix(rng, 10, 15);
    const VectorXd y = gaussian_vector(rng, 10);
    const SolveReport r = solve_lasso(y, a, *set, {});
    EXPECT_LE(distance(*set, r.xhat), 1e-8);
    EXPECT_GE(r.objective, 0.0);
    EXPECT_GE(r.gap_upper, 0.0);
  }
}

TEST(SolveLasso, ScalingEquivariance) {
  Rng rng(10);
  const auto sparse = make_sparse_cone(10, 2);
  const auto uni = make_union({random_orthonormal_basis(rng, 10, 2), random_orthonormal_basis(rng, 10, 3)});
  for (const auto* set : {&sparse, &uni}) {
    for (int t = 0; t < 10; ++t) {
      const MatrixXd a = gaussian_matrix(rng, 9, 10);
      const VectorXd y = a * sample_point(*set, rng, true) + 0.01 * gaussian_vector(rng, 9);
      const double c = 3.7;
      const SolveReport r1 = solve_lasso(y, a, *set, {});
      const SolveReport r2 = solve_lasso(VectorXd(c * y), a, *set, {});
      EXPECT_LE((r2.xhat - c * r1.xhat).norm(), 1e-8 * c * (1.0 + r1.xhat.norm()));
    }
  }
}

TEST(SolveLasso, FactoredMeasurementMatchesProduct) {
  Rng rng(11);
  const MatrixXd b = gaussian_matrix(rng, 8, 12);
  const MatrixXd a = gaussian_matrix(rng, 12, 10);
  const MatrixXd m = b * a;
  const auto set = make_sparse_cone(10, 2);
  const VectorXd y = m * sample_point(set, rng, true);
  const SolveReport r1 = solve_lasso(y, m, set, {});
  const SolveReport r2 = solve_lasso(y, MatrixXd(b * a), set, {});
  EXPECT_LE((r1.xhat - r2.xhat).norm(), 1e-10);
}

TEST(SolveLasso, Errors) {
  const auto set = make_sparse_cone(4, 1);
  const MatrixXd m = MatrixXd::Identity(4, 4);
  VectorXd y = VectorXd::Ones(4);
  EXPECT_THROW(solve_lasso(VectorXd::Ones(3), m, set, {}), std::invalid_argument);
  EXPECT_THROW(solve_lasso(y, MatrixXd::Identity(4, 5), set, {}), std::invalid_argument);
  SolveOptions zero;
  zero.max_iterations = 0;
  EXPECT_THROW(solve_lasso(y, m, set, zero), std::invalid_argument);
  y[2] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(solve_lasso(y, m, set, {}), std::domain_error);
}

TEST(SolveWithGapTarget, InfiniteTargetIsOnePass) {
  Rng rng(12);
  const auto set = make_sparse_cone(20, 2);
  const MatrixXd a = gaussian_matrix(rng, 10, 20);
  const VectorXd y = gaussian_vector(rng, 10);
  const SolveReport once = solve_lasso(y, a, set, {});
  const SolveReport r = solve_with_gap_target(y, a, set, std::numeric_limits<double>::infinity(), {});
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.xhat, once.xhat);
}

TEST(SolveWithGapTarget, ExactVariantZeroTarget) {
  Rng rng(13);
  const auto sub = make_subspace(random_orthonormal_basis(rng, 10, 3));
  const MatrixXd a = gaussian_matrix(rng, 8, 10);
  const SolveReport r = solve_with_gap_target(gaussian_vector(rng, 8), a, sub, 0.0, {});
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.gap_upper, 0.0);
  EXPECT_THROW(solve_with_gap_target(gaussian_vector(rng, 8), a, sub, -1.0, {}), std::invalid_argument);
}

TEST(SolveWithGapTarget, TinyGnnConverges) {
  const GnnModel model = random_gnn({2, 6, 10}, 42);
  const auto set = make_gnn_range(model);
  int converged = 0;
  for (int t = 0; t < 50; ++t) {
    Rng rng(derive_seed(14, t));
    const MatrixXd a = gaussian_matrix(rng, 8, 10);
    const VectorXd y = a * sample_point(set, rng, true) + 0.05 * random_unit_vector(rng, 8);
    SolveOptions opts;
    opts.seed = derive_seed(15, t);
    const SolveReport r = solve_with_gap_target(y, a, set, 1e-3, opts);
    EXPECT_FALSE(r.gap_certified);
    EXPECT_EQ(r.strategy, SolveStrategy::LatentDescent);
    if (r.converged) ++converged;
  }
  EXPECT_GE(converged, 45);
}

TEST(SpectralNorm, PowerIterationEstimate) {
  Rng rng(16);
  const MatrixXd m = gaussian_matrix(rng, 15, 9);
  const double exact = Eigen::JacobiSVD<MatrixXd>(m).singularValues()[0];
  EXPECT_NEAR(spectral_norm_estimate(m, 200, 1), exact, 1e-6 * exact);
  EXPECT_EQ(spectral_norm_estimate(MatrixXd::Zero(3, 3), 10, 1), 0.0);
}
