#pragma once

#include "mixcs/core.hpp"
#include "mixcs/gnn.hpp"

#include <string>
#include <variant>
#include <vector>

namespace mixcs {

/// s-sparse vectors of R^n.
struct SparseCone {
  Index sparsity = 1;
};

/// span of the orthonormal columns of `basis` (n x d).
struct Subspace {
  MatrixXd basis;
};

struct UnionOfSubspaces {
  std::vector<MatrixXd> bases;
};

/// ran(G) for a ReLU-family network.
struct GnnRange {
  GnnModel model;
};

/// The structure set T, a closed cone in R^n.
struct StructureSet {
  std::variant<SparseCone, Subspace, UnionOfSubspaces, GnnRange> variant;
  Index ambient = 0;

  /// True when projection and the width supremum are computed exactly.
  bool is_exact() const { return !std::holds_alternative<GnnRange>(variant); }
};

StructureSet make_sparse_cone(Index n, Index sparsity);
StructureSet make_subspace(MatrixXd basis);
StructureSet make_union(std::vector<MatrixXd> bases);
StructureSet make_gnn_range(GnnModel model);

/// Throws std::invalid_argument when invariants fail (orthonormality to
/// 1e-10, sparsity range, model shapes).
void validate(const StructureSet& set);

std::string describe(const StructureSet& set);

/// Indices of the s largest-magnitude entries, ties broken by lowest index,
/// returned in increasing order.
std::vector<Index> top_support(const Eigen::Ref<const VectorXd>& v, Index s);

/// Keeps the s largest-magnitude entries of v.
template <typename Derived>
Vector<typename Derived::Scalar> hard_threshold(const Eigen::MatrixBase<Derived>& v, Index s) {
  Vector<typename Derived::Scalar> out = Vector<typename Derived::Scalar>::Zero(v.size());
  for (Index i : top_support(v.template cast<double>(), s)) out[i] = v[i];
  return out;
}

struct ProjectOptions {
  int restarts = 10;
  int audit_restarts = 10;
  int max_iterations = 500;
  double rel_tol = 1e-9;
  Seed seed = 0;
  int threads = 1;
};

struct Projection {
  VectorXd point;
  double distance = 0.0;
  /// 0 for exact variants; for GnnRange, achieved distance minus the best
  /// distance over primary and audit restarts (heuristic, not certified).
  double gap = 0.0;
};

Projection project(const StructureSet& set, const Eigen::Ref<const VectorXd>& v,
                   const ProjectOptions& opts = {});

double distance(const StructureSet& set, const Eigen::Ref<const VectorXd>& x, const ProjectOptions& opts = {});

/// A random point of T (normalized to unit norm when asked). Resamples a
/// zero draw up to 100 times before throwing std::domain_error.
VectorXd sample_point(const StructureSet& set, Rng& rng, bool normalize);

// ---------------------------------------------------------------------------
// Linear regions of a ReLU network
// ---------------------------------------------------------------------------

struct LinearRegion {
  ActivationPattern pattern;
  /// Orthonormal basis (n x dim) of the span of the region's linear map.
  MatrixXd basis;
  /// Latent point satisfying the pattern (active units at margin >= 1e-9).
  VectorXd witness;
};

inline constexpr Index kMaxRegionLatentDim = 3;
inline constexpr Index kMaxRegionUnits = 20;

/// Enumerates every feasible activation pattern by branching unit by unit
/// and pruning with a linear feasibility check. Units at pre-activation 0
/// count as inactive. Refuses (std::invalid_argument) when k > 3 or the
/// network has more than 20 units in total.
std::vector<LinearRegion> enumerate_regions(const GnnModel& model);

}  // namespace mixcs
