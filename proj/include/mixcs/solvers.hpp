#pragma once

#include "mixcs/core.hpp"
#include "mixcs/structures.hpp"

#include <string>
#include <vector>

namespace mixcs {

enum class SolveStrategy { SubspaceLeastSquares, UnionLeastSquares, HardThresholding, LatentDescent };

std::string to_string(SolveStrategy strategy);

struct SolveOptions {
  int max_iterations = 500;
  double rel_tol = 1e-12;
  /// Power iterations for the step size 1/sigma_max(M)^2.
  int power_iterations = 100;
  /// Supports are checked exhaustively for a certified gap when n <= this.
  Index exhaustive_max_n = 12;
  Index max_union_members = 10000;
  int restarts = 10;
  int audit_restarts = 10;
  Seed seed = 0;
  int threads = 1;
};

/// Result of min ||y - M x||^2 over x in T.
struct SolveReport {
  VectorXd xhat;
  double objective = 0.0;  // ||y - M xhat||^2
  /// Upper bound on objective - min_T objective (the squared optimization
  /// margin). Certified for exact variants and the exhaustive sparse
  /// oracle, heuristic otherwise.
  double gap_upper = 0.0;
  bool gap_certified = true;
  int iterations = 0;
  bool converged = false;
  SolveStrategy strategy = SolveStrategy::SubspaceLeastSquares;
  /// Objective after every hard-thresholding step (HardThresholding only).
  std::vector<double> objective_trace;

  /// The optimization margin epsilon = sqrt(gap_upper).
  double eps() const { return std::sqrt(std::max(gap_upper, 0.0)); }
};

SolveReport solve_lasso(const Eigen::Ref<const VectorXd>& y, const Eigen::Ref<const MatrixXd>& m,
                        const StructureSet& set, const SolveOptions& opts = {});

/// Reruns solve_lasso with doubled budgets (up to four rounds) until
/// eps() <= eps_target. Returns the best report; `converged` tells whether
/// the target was met.
SolveReport solve_with_gap_target(const Eigen::Ref<const VectorXd>& y, const Eigen::Ref<const MatrixXd>& m,
                                  const StructureSet& set, double eps_target, const SolveOptions& opts = {});

/// Largest singular value of M by power iteration on M^T M.
double spectral_norm_estimate(const Eigen::Ref<const MatrixXd>& m, int iterations, Seed seed);

/// Least squares restricted to the coordinates in `support`.
VectorXd least_squares_on_support(const Eigen::Ref<const VectorXd>& y, const Eigen::Ref<const MatrixXd>& m,
                                  const std::vector<Index>& support);

}  // namespace mixcs
