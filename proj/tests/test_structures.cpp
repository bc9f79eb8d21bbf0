#include "mixcs/structures.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace mixcs;

namespace {

VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

MatrixXd axis(Index n, Index i) {
  MatrixXd e = MatrixXd::Zero(n, 1);
  e(i, 0) = 1.0;
  return e;
}

// Best s-sparse approximation by trying every support.
double brute_force_sparse_distance(const VectorXd& v, Index s) {
  const Index n = v.size();
  double best = std::numeric_limits<double>::infinity();
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    if (static_cast<Index>(std::popcount(mask)) != s) continue;
    double rest = 0.0;
    for (Index i = 0; i < n; ++i)
      if (!(mask >> i & 1u)) rest += v[i] * v[i];
    best = std::min(best, std::sqrt(rest));
  }
  return best;
}

}  // namespace

TEST(Project, SparseExample) {
  const auto p = project(make_sparse_cone(2, 1), vec({3, -1}));
  EXPECT_EQ(p.point, vec({3, 0}));
  EXPECT_DOUBLE_EQ(p.distance, 1.0);
  EXPECT_EQ(p.gap, 0.0);
}

TEST(Project, SubspaceExample) {
  const auto p = project(make_subspace(axis(2, 0)), vec({2, 5}));
  EXPECT_NEAR((p.point - vec({2, 0})).norm(), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(p.distance, 5.0);
  EXPECT_EQ(p.gap, 0.0);
}

TEST(Project, UnionExample) {
  const auto p = project(make_union({axis(2, 0), axis(2, 1)}), vec({1, 4}));
  EXPECT_NEAR((p.point - vec({0, 4})).norm(), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(p.distance, 1.0);
}

TEST(Project, TiesGoToLowestIndex) {
  EXPECT_EQ(project(make_sparse_cone(3, 1), vec({2, -2, 2})).point, vec({2, 0, 0}));
  EXPECT_EQ(top_support(vec({1, 3, 3, 1}), 2), (std::vector<Index>{1, 2}));
}

TEST(Distance, Examples) {
  EXPECT_DOUBLE_EQ(distance(make_sparse_cone(2, 1), vec({3, 4})), 3.0);
  EXPECT_EQ(distance(make_sparse_cone(3, 2), vec({0, 1, 2})), 0.0);
}

TEST(Project, HardThresholdMatchesBruteForce) {
  Rng rng(12);
  for (int t = 0; t < 100; ++t) {
    const Index n = std::uniform_int_distribution<Index>(1, 12)(rng);
    const Index s = std::uniform_int_distribution<Index>(1, n)(rng);
    const VectorXd v = gaussian_vector(rng, n);
    EXPECT_NEAR(distance(make_sparse_cone(n, s), v), brute_force_sparse_distance(v, s), 1e-12);
  }
}

TEST(Project, IdempotentForExactVariants) {
  Rng rng(3);
  std::vector<StructureSet> sets = {make_sparse_cone(8, 3), make_subspace(random_orthonormal_basis(rng, 8, 3)),
                                    make_union({random_orthonormal_basis(rng, 8, 2),
                                                random_orthonormal_basis(rng, 8, 3)})};
  for (const auto& set : sets) {
    for (int t = 0; t < 20; ++t) {
      const VectorXd v = gaussian_vector(rng, 8);
      const VectorXd p = project(set, v).point;
      EXPECT_LE((project(set, p).point - p).norm(), 1e-10);
    }
  }
}

TEST(Project, UnionMatchesMemberBruteForce) {
  Rng rng(7);
  std::vector<MatrixXd> bases;
  for (int i = 0; i < 6; ++i) bases.push_back(random_orthonormal_basis(rng, 9, 2));
  const auto set = make_union(bases);
  for (int t = 0; t < 30; ++t) {
    const VectorXd v = gaussian_vector(rng, 9);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& b : bases) best = std::min(best, (v - b * (b.transpose() * v)).norm());
    EXPECT_NEAR(distance(set, v), best, 1e-12);
  }
}

TEST(Structures, ValidationRejectsBadInput) {
  EXPECT_THROW(make_sparse_cone(3, 0), std::invalid_argument);
  EXPECT_THROW(make_sparse_cone(3, 4), std::invalid_argument);
  EXPECT_THROW(make_subspace(MatrixXd::Ones(3, 2)), std::invalid_argument);
  EXPECT_THROW(make_union({}), std::invalid_argument);
  EXPECT_THROW(make_union({axis(3, 0), axis(2, 0)}), std::invalid_argument);
  EXPECT_THROW(project(make_sparse_cone(3, 1), VectorXd::Ones(4)), std::invalid_argument);
}

TEST(Structures, GnnProjectionNeedsRestarts) {
  ProjectOptions opts;
  opts.restarts = 0;
  EXPECT_THROW(project(make_gnn_range(random_gnn({1, 3}, 1)), VectorXd::Ones(3), opts), std::invalid_argument);
}

TEST(SamplePoint, Membership) {
  Rng rng(5);
  const auto sparse = make_sparse_cone(10, 2);
  for (int t = 0; t < 50; ++t) {
    const VectorXd x = sample_point(sparse, rng, false);
    EXPECT_LE((x.array() != 0.0).count(), 2);
    EXPECT_EQ(distance(sparse, x), 0.0);
  }
  const auto sub = make_subspace(random_orthonormal_basis(rng, 10, 3));
  for (int t = 0; t < 20; ++t) {
    const VectorXd x = sample_point(sub, rng, true);
    EXPECT_NEAR(x.norm(), 1.0, 1e-14);
    EXPECT_LE(distance(sub, x), 1e-10);
  }
}

TEST(SamplePoint, GnnSelfConsistency) {
  const auto set = make_gnn_range(random_gnn({2, 8, 16}, 4));
  Rng rng(9);
  ProjectOptions opts;
  opts.seed = 3;
  for (int t = 0; t < 10; ++t) {
    const VectorXd x = sample_point(set, rng, true);
    EXPECT_LE(project(set, x, opts).distance, 1e-6);
  }
}

TEST(SamplePoint, ZeroDrawsExhaustRetries) {
  GnnModel zero;
  zero.weights = {MatrixXd::Zero(3, 2)};
  Rng rng(1);
  EXPECT_THROW(sample_point(make_gnn_range(zero), rng, true), std::domain_error);
}

TEST(Distance, GnnPerturbedPoint) {
  const GnnModel model = random_gnn({2, 10, 20}, 13);
  const auto set = make_gnn_range(model);
  Rng rng(2);
  ProjectOptions opts;
  opts.seed = 5;
  for (int t = 0; t < 10; ++t) {
    const VectorXd x = gnn_forward(model, gaussian_vector(rng, 2)) + 0.1 * random_unit_vector(rng, 20);
    EXPECT_LE(distance(set, x, opts), 0.1 + 1e-6);
  }
}

TEST(Distance, ConeScaling) {
  Rng rng(4);
  const auto sparse = make_sparse_cone(12, 3);
  const auto gnn = make_gnn_range(random_gnn({2, 8, 12}, 6));
  ProjectOptions opts;
  opts.seed = 2;
  for (int t = 0; t < 10; ++t) {
    const VectorXd x = gaussian_vector(rng, 12);
    for (double lambda : {0.5, 3.0}) {
      const double ds = distance(sparse, x);
      EXPECT_NEAR(distance(sparse, VectorXd(lambda * x)), lambda * ds, 1e-6 * lambda * ds);
      const double dg = distance(gnn, x, opts);
      EXPECT_NEAR(distance(gnn, VectorXd(lambda * x), opts), lambda * dg, 1e-2 * lambda * dg);
    }
    EXPECT_EQ(distance(sparse, VectorXd(0.0 * x)), 0.0);
  }
}

TEST(Regions, ZeroModelHasSingleTrivialRegion) {
  GnnModel zero;
  zero.weights = {MatrixXd::Zero(3, 2), MatrixXd::Zero(2, 3)};
  const auto regions = enumerate_regions(zero);
  ASSERT_EQ(regions.size(), 1u);
  EXPECT_EQ(regions[0].basis.cols(), 0);
}

TEST(Regions, OneLayerScalarLatent) {
  GnnModel m;
  MatrixXd a(2, 1);
  a << 1, -1;
  m.weights = {a};
  const auto regions = enumerate_regions(m);
  int nontrivial = 0;
  for (const auto& r : regions) {
    EXPECT_LE(r.basis.cols(), 1);
    if (r.basis.cols() == 1) ++nontrivial;
  }
  EXPECT_EQ(nontrivial, 2);
  EXPECT_LE(static_cast<double>(regions.size()), 4.0 * std::exp(1.0));
}

TEST(Regions, ForwardEvaluationsLieInEnumeratedSubspaces) {
  const GnnModel model = random_gnn({1, 3, 4}, 77);
  const auto regions = enumerate_regions(model);
  Rng rng(8);
  for (int t = 0; t < 20; ++t) {
    const VectorXd g = gnn_forward(model, gaussian_vector(rng, 1));
    double best = std::numeric_limits<double>::infinity();
    for (const auto& r : regions) best = std::min(best, (g - r.basis * (r.basis.transpose() * g)).norm());
    EXPECT_LE(best, 1e-8);
  }
}

TEST(Regions, PatternsAreFeasibleAndBounded) {
  Rng rng(10);
  for (int t = 0; t < 10; ++t) {
    const GnnModel model = random_gnn({2, 4, 5}, derive_seed(10, t));
    const auto regions = enumerate_regions(model);
    const double bound = std::pow(std::pow(2.0 * std::exp(1.0) / 2.0, 2.0) * 4.0 * 5.0, 2.0);
    EXPECT_LE(static_cast<double>(regions.size()), bound);
    for (const auto& r : regions) {
      EXPECT_LE(r.basis.cols(), 2);
      EXPECT_EQ(gnn_trace(model, r.witness).pattern, r.pattern);
    }
  }
}

TEST(Regions, ScaleGuard) {
  EXPECT_THROW(enumerate_regions(random_gnn({4, 3}, 1)), std::invalid_argument);
  EXPECT_THROW(enumerate_regions(random_gnn({2, 11, 10}, 1)), std::invalid_argument);
}
