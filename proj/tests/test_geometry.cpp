#include "mixcs/geometry.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace mixcs;

namespace {

// E||P g|| for d-dimensional subspaces, evaluated with mpmath at 30 digits.
double chi_mean(Index d) {
  switch (d) {
    case 1: return 0.797884560802865355879892119869;
    case 2: return 1.25331413731550025120788264241;
    case 4: return 1.87997120597325037681182396361;
    case 8: return 2.74162467537765679951724328026;
    case 16: return 3.93802562188732622877086172064;
  }
  return 0.0;
}

double binomial(Index n, Index k) {
  double r = 1.0;
  for (Index i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

MatrixXd span_of(std::initializer_list<double> v) {
  VectorXd x(static_cast<Index>(v.size()));
  Index i = 0;
  for (double c : v) x[i++] = c;
  return x.normalized();
}

Eigen::VectorXi signs(std::initializer_list<int> v) {
  Eigen::VectorXi s(static_cast<Index>(v.size()));
  Index i = 0;
  for (int c : v) s[i++] = c;
  return s;
}

}  // namespace

TEST(SubspaceWidth, ClosedFormMatchesOracle) {
  for (Index d : {1, 2, 4, 8, 16}) EXPECT_NEAR(subspace_width(d), chi_mean(d), 1e-13);
}

class SubspaceWidthMc : public ::testing::TestWithParam<Index> {};

TEST_P(SubspaceWidthMc, WithinThreeStderrOfChiMean) {
  const Index d = GetParam();
  Rng rng(derive_seed(31, static_cast<std::uint64_t>(d)));
  const auto set = make_subspace(random_orthonormal_basis(rng, 24, d));
  const WidthEstimate w = width_mc(set, WidthTarget::Set, 10000, 2024);
  EXPECT_EQ(w.sup_solver, SupSolver::Exact);
  EXPECT_EQ(w.num_gaussians, 10000);
  EXPECT_LE(std::abs(w.mean - chi_mean(d)), 3.0 * w.std_error);
}

INSTANTIATE_TEST_SUITE_P(Dims, SubspaceWidthMc, ::testing::Values(1, 2, 4, 8, 16));

TEST(WidthMc, SinglePointHasZeroWidth) {
  MatrixXd r(3, 1);
  r << 0.2, -1, 4;
  EXPECT_EQ(width_of_points(r, 1000, 1).mean, 0.0);
}

TEST(WidthMc, SparseSupMatchesBruteForce) {
  // sup over s-sparse unit vectors of <v, g> = norm of the s largest |g_i|.
  Rng rng(4);
  for (int t = 0; t < 30; ++t) {
    const Index n = std::uniform_int_distribution<Index>(2, 12)(rng);
    const Index s = std::uniform_int_distribution<Index>(1, n)(rng);
    const VectorXd g = gaussian_vector(rng, n);
    double brute = 0.0;
    for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
      if (static_cast<Index>(std::popcount(mask)) != s) continue;
      double sq = 0.0;
      for (Index i = 0; i < n; ++i)
        if (mask >> i & 1u) sq += g[i] * g[i];
      brute = std::max(brute, std::sqrt(sq));
    }
    EXPECT_NEAR(hard_threshold(g, s).norm(), brute, 1e-12);
  }
}

TEST(WidthMc, SparseDifferenceSetUsesTwiceTheSparsity) {
  const auto a = width_mc(make_sparse_cone(20, 3), WidthTarget::Difference, 2000, 5);
  const auto b = width_mc(make_sparse_cone(20, 6), WidthTarget::Set, 2000, 5);
  EXPECT_DOUBLE_EQ(a.mean, b.mean);
}

TEST(WidthMc, MonotoneFromSetToDifferenceSet) {
  Rng rng(12);
  std::vector<StructureSet> sets = {make_sparse_cone(16, 2), make_subspace(random_orthonormal_basis(rng, 16, 3)),
                                    make_union({random_orthonormal_basis(rng, 16, 2),
                                                random_orthonormal_basis(rng, 16, 2),
                                                random_orthonormal_basis(rng, 16, 1)}),
                                    make_gnn_range(random_gnn({2, 5, 8}, 3))};
  for (const auto& set : sets) {
    const Index ng = set.is_exact() ? 3000 : 500;
    const auto a = width_mc(set, WidthTarget::Set, ng, 77);
    const auto b = width_mc(set, WidthTarget::Difference, ng, 78);
    EXPECT_LE(a.mean, b.mean + 2.0 * std::hypot(a.std_error, b.std_error)) << describe(set);
  }
}

TEST(WidthMc, GnnIsFlaggedLatentApprox) {
  const auto set = make_gnn_range(random_gnn({1, 3, 5}, 2));
  EXPECT_EQ(width_mc(set, WidthTarget::Set, 200, 1).sup_solver, SupSolver::LatentApprox);
  WidthOptions opts;
  opts.restarts = 0;
  EXPECT_THROW(width_mc(set, WidthTarget::Set, 200, 1, opts), std::invalid_argument);
}

TEST(WidthMc, RejectsTooFewGaussians) {
  EXPECT_THROW(width_mc(make_sparse_cone(4, 1), WidthTarget::Set, 99, 1), std::invalid_argument);
}

TEST(WidthMc, DeterministicAcrossThreadCounts) {
  const auto set = make_sparse_cone(30, 4);
  WidthOptions one, four;
  four.threads = 4;
  const auto a = width_mc(set, WidthTarget::Difference, 1000, 3, one);
  const auto b = width_mc(set, WidthTarget::Difference, 1000, 3, four);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.std_error, b.std_error);
}

TEST(WidthMc, TinyGnnBelowBound) {
  for (Seed seed : {1, 2, 3}) {
    const GnnModel model = random_gnn({1, 3, 4}, seed);
    const auto w = width_mc(make_gnn_range(model), WidthTarget::Difference, 500, seed);
    EXPECT_LE(w.mean, gnn_width_bound(1, {3, 4}).width_bound);
  }
}

TEST(GnnWidthBound, SmallestExample) {
  const auto b = gnn_width_bound(1, {2});
  EXPECT_NEAR(b.region_count_bound, 10.8731273138361809414, 1e-12);
  EXPECT_NEAR(b.width_bound, 3.59883909601490919633, 1e-12);
  EXPECT_FALSE(b.flagged);
}

TEST(GnnWidthBound, SymmetricCase) {
  for (Index k : {1, 2, 5}) {
    for (Index d : {1, 3}) {
      const auto b = gnn_width_bound(k, std::vector<Index>(static_cast<std::size_t>(d), k));
      EXPECT_NEAR(b.geometric_mean_width, static_cast<double>(k), 1e-12);
      const double expected =
          std::sqrt(2.0 * k) + std::sqrt(2.0 * k * d * std::log(2.0 * std::exp(1.0)));
      EXPECT_NEAR(b.width_bound, expected, 1e-12);
    }
  }
}

TEST(GnnWidthBound, LogGrowthInWidth) {
  // Only the second summand depends on p'; its ratio follows sqrt(log).
  const double small = gnn_width_bound(1, {2}).width_bound - std::sqrt(2.0);
  const double large = gnn_width_bound(1, {1024}).width_bound - std::sqrt(2.0);
  EXPECT_NEAR(large / small, 1.90111308740857827124, 1e-12);
}

TEST(GnnWidthBound, HugeCountsStayFinite) {
  const auto b = gnn_width_bound(3, std::vector<Index>(40, 1000));
  EXPECT_TRUE(std::isfinite(b.log_region_count_bound));
  EXPECT_TRUE(std::isfinite(b.width_bound));
}

TEST(GnnWidthBound, LatentWiderThanLayerIsFlagged) {
  EXPECT_TRUE(gnn_width_bound(4, {2, 8}).flagged);
  EXPECT_FALSE(gnn_width_bound(2, {2, 8}).flagged);
}

TEST(Orthants, Examples) {
  EXPECT_EQ(count_orthants(span_of({1, 1}), OrthantMode::Exhaustive), 2);
  EXPECT_EQ(count_orthants(span_of({1, 0}), OrthantMode::Exhaustive), 4);
  EXPECT_EQ(count_orthants(MatrixXd::Identity(4, 4), OrthantMode::Exhaustive), 16);
}

TEST(Orthants, BoundOnRandomSubspaces) {
  Rng rng(21);
  for (int t = 0; t < 60; ++t) {
    const Index k = std::uniform_int_distribution<Index>(1, 3)(rng);
    const Index n = std::uniform_int_distribution<Index>(k, 9)(rng);
    const MatrixXd basis = random_orthonormal_basis(rng, n, k);
    EXPECT_LE(static_cast<double>(count_orthants(basis, OrthantMode::Exhaustive)),
              std::ldexp(binomial(n, k), static_cast<int>(k)));
  }
}

TEST(Orthants, SampledModeIsALowerBound) {
  Rng rng(3);
  for (int t = 0; t < 10; ++t) {
    const MatrixXd basis = random_orthonormal_basis(rng, 7, 2);
    EXPECT_LE(count_orthants(basis, OrthantMode::Sampled, 500, 9), count_orthants(basis, OrthantMode::Exhaustive));
  }
}

TEST(Orthants, ScaleGuard) {
  EXPECT_THROW(count_orthants(span_of({1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1}),
                              OrthantMode::Exhaustive),
               std::invalid_argument);
}

TEST(Orthants, MeetsSubspace) {
  EXPECT_TRUE(orthant_meets_subspace(span_of({1, 1}), signs({1, 1})));
  EXPECT_FALSE(orthant_meets_subspace(span_of({1, 1}), signs({1, -1})));
  EXPECT_TRUE(orthant_meets_subspace(span_of({1, 0}), signs({1, -1})));
}

TEST(ReluImageDim, Examples) {
  Rng rng(1);
  const MatrixXd b = random_orthonormal_basis(rng, 5, 2);
  EXPECT_EQ(relu_image_dim(b, signs({-1, -1, -1, -1, -1})), 0);
  EXPECT_EQ(relu_image_dim(span_of({1, 0}), signs({1, 1})), 1);
  EXPECT_LE(relu_image_dim(b, signs({1, -1, -1, -1, -1})), 1);
}

TEST(ReluImageDim, NeverExceedsMinKQ) {
  Rng rng(8);
  for (int t = 0; t < 200; ++t) {
    const Index n = std::uniform_int_distribution<Index>(2, 10)(rng);
    const Index k = std::uniform_int_distribution<Index>(1, std::min<Index>(n, 4))(rng);
    const MatrixXd b = random_orthonormal_basis(rng, n, k);
    Eigen::VectorXi s(n);
    for (Index i = 0; i < n; ++i) s[i] = std::bernoulli_distribution(0.5)(rng) ? 1 : -1;
    EXPECT_LE(relu_image_dim(b, s), std::min<Index>(k, (s.array() > 0).count()));
  }
}

TEST(UnionWidth, SingleMemberIsExact) {
  Rng rng(2);
  const auto r = union_width_check({random_orthonormal_basis(rng, 10, 3)}, 1000, 4);
  EXPECT_EQ(r.lhs, r.max_width);
  EXPECT_EQ(r.sqrt_log_n, 0.0);
}

TEST(UnionWidth, CopiesOfOneSubspace) {
  Rng rng(5);
  const MatrixXd b = random_orthonormal_basis(rng, 12, 2);
  const auto r = union_width_check({b, b, b, b}, 2000, 6);
  EXPECT_LE(std::abs(r.lhs - r.max_width), 2.0 * r.lhs_std_error);
}

TEST(UnionWidth, SixtyFourPlanesInR32) {
  const auto r = union_width_check(std::vector<Index>(64, 2), 32, 4000, 2024);
  EXPECT_LE((r.lhs - r.max_width) / r.sqrt_log_n, 4.0);
  EXPECT_NEAR(r.sqrt_log_n, std::sqrt(std::log(64.0)), 1e-15);
}

TEST(Oversampling, Examples) {
  EXPECT_NEAR(oversampling_factor(MatrixXd::Identity(100, 100), 5.0), 4.0, 1e-12);
  MatrixXd d = MatrixXd::Zero(3, 3);
  d.diagonal() << 2, 1, 1;
  EXPECT_NEAR(oversampling_factor(d, 1.0), 1.5, 1e-12);
  EXPECT_NEAR(oversampling_factor(MatrixXd::Identity(50, 50), std::sqrt(50.0)), 1.0, 1e-12);
  EXPECT_THROW(oversampling_factor(d, 0.0), std::domain_error);
}
