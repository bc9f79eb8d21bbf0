#pragma once

#include "mixcs/core.hpp"

namespace mixcs {

struct BoxConeLpResult {
  double value = 0.0;
  VectorXd x;
};

/// Solves
///   maximize  objective . x
///   s.t.      constraints * x <= 0,   -1 <= x_j <= 1
/// with a dense tableau simplex (Bland's rule). x = 0 is always feasible,
/// so the optimum is >= 0; a strictly positive optimum certifies a nonzero
/// point of the cone on which the objective is positive.
BoxConeLpResult maximize_over_box_cone(const MatrixXd& constraints, const VectorXd& objective);

}  // namespace mixcs
