#pragma once

#include "mixcs/core.hpp"
#include "mixcs/structures.hpp"

#include <string>
#include <vector>

namespace mixcs {

enum class WidthTarget {
  Set,         // T ∩ S^{n-1}
  Difference,  // (T - T) ∩ S^{n-1}
};

enum class SupSolver { Exact, LatentApprox };

std::string to_string(WidthTarget target);
WidthTarget parse_width_target(const std::string& name);
std::string to_string(SupSolver solver);

/// Monte Carlo estimate of w(K) = E sup_{v in K} <v, g>.
struct WidthEstimate {
  double mean = 0.0;
  double std_error = 0.0;  // sample std / sqrt(num_gaussians)
  Index num_gaussians = 0;
  SupSolver sup_solver = SupSolver::Exact;
};

struct WidthOptions {
  /// Latent-space search for GnnRange (lower estimate of the sup).
  int restarts = 8;
  int max_iterations = 60;
  int threads = 1;
};

/// Gaussian draw i uses seed derive_seed(seed, i), so estimates for
/// different targets of the same set share their Gaussians.
WidthEstimate width_mc(const StructureSet& set, WidthTarget target, Index num_gaussians, Seed seed,
                       const WidthOptions& opts = {});

/// Width of a finite point set. A single point has width exactly 0.
WidthEstimate width_of_points(const MatrixXd& points, Index num_gaussians, Seed seed);

/// E||P g|| for a d-dimensional subspace: sqrt(2) Gamma((d+1)/2) / Gamma(d/2).
double subspace_width(Index d);

/// Orthonormal bases of E_i + E_j (i < j), covering (T - T) for a union.
std::vector<MatrixXd> pairwise_sum_bases(const std::vector<MatrixXd>& bases);

struct GnnWidthBound {
  double log_region_count_bound = 0.0;
  double region_count_bound = 0.0;  // may be +inf when the log is large
  double width_bound = 0.0;
  double geometric_mean_width = 0.0;  // p'
  /// k exceeds some p_i, or p' is so small that log(2e p'/k) < 0.
  bool flagged = false;
};

/// Region count N <= [(2e/k)^d prod p_i]^k and the width bound
/// w((T-T) ∩ S) <= sqrt(2k) + sqrt(2 k d log(2e p'/k)).
GnnWidthBound gnn_width_bound(Index k, const std::vector<Index>& layer_widths);

enum class OrthantMode { Exhaustive, Sampled };

inline constexpr Index kMaxExhaustiveOrthantDim = 20;

/// Number of closed orthants of R^n containing a nonzero point of the
/// column span of `basis`. Exhaustive mode checks all 2^n sign vectors
/// with a linear program; sampled mode returns a lower bound from the sign
/// vectors of `samples` random points of the subspace.
std::int64_t count_orthants(const MatrixXd& basis, OrthantMode mode, Index samples = 0, Seed seed = 0);

/// Whether the closed orthant with the given +-1 signs meets the subspace
/// in a nonzero point.
bool orthant_meets_subspace(const MatrixXd& basis, const Eigen::VectorXi& signs);

/// Dimension of span{relu(v) : v in D ∩ Q}, computed as the numerical rank
/// of the basis restricted to the positive coordinates of the orthant.
Index relu_image_dim(const MatrixXd& basis, const Eigen::VectorXi& signs);

struct UnionWidthCheck {
  double lhs = 0.0;  // w(∪ T_i)
  double lhs_std_error = 0.0;
  double max_width = 0.0;  // max_i w(T_i)
  double sqrt_log_n = 0.0;
};

UnionWidthCheck union_width_check(const std::vector<MatrixXd>& bases, Index num_gaussians, Seed seed);
/// Draws one random subspace per entry of `dims` in R^n, then checks.
UnionWidthCheck union_width_check(const std::vector<Index>& dims, Index n, Index num_gaussians, Seed seed);

/// sr(B) / w^2.
double oversampling_factor(const MatrixXd& b, double width);

}  // namespace mixcs
