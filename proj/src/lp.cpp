#include "mixcs/lp.hpp"

#include <stdexcept>

namespace mixcs {

BoxConeLpResult maximize_over_box_cone(const MatrixXd& constraints, const VectorXd& objective) {
  const Index q = objective.size();
  if (constraints.rows() > 0 && constraints.cols() != q)
    throw std::invalid_argument("maximize_over_box_cone: constraint width mismatch");
  const Index r = constraints.rows();
  // Columns: x+ (q), x- (q), slacks (r + 2q), rhs.
  const Index rows = r + 2 * q;
  const Index vars = 2 * q + rows;
  MatrixXd t = MatrixXd::Zero(rows + 1, vars + 1);
  for (Index i = 0; i < r; ++i) {
    t.row(i).segment(0, q) = constraints.row(i);
    t.row(i).segment(q, q) = -constraints.row(i);
  }
  for (Index j = 0; j < q; ++j) {
    t(r + j, j) = 1.0;
    t(r + q + j, q + j) = 1.0;
    t(r + j, vars) = 1.0;
    t(r + q + j, vars) = 1.0;
  }
  for (Index i = 0; i < rows; ++i) t(i, 2 * q + i) = 1.0;
  // Reduced-cost row for a maximization: -c.
  t.row(rows).segment(0, q) = -objective.transpose();
  t.row(rows).segment(q, q) = objective.transpose();

  std::vector<Index> basis(rows);
  for (Index i = 0; i < rows; ++i) basis[i] = 2 * q + i;

  constexpr double kTol = 1e-11;
  const Index max_pivots = 50 * (rows + vars) + 100;
  for (Index pivots = 0;; ++pivots) {
    if (pivots > max_pivots) throw std::runtime_error("maximize_over_box_cone: pivot limit reached");
    Index enter = -1;
    for (Index j = 0; j < vars; ++j) {
      if (t(rows, j) < -kTol) {
        enter = j;
        break;
      }
    }
    if (enter < 0) break;
    Index leave = -1;
    double best_ratio = 0.0;
    for (Index i = 0; i < rows; ++i) {
      const double a = t(i, enter);
      if (a <= kTol) continue;
      const double ratio = t(i, vars) / a;
      if (leave < 0 || ratio < best_ratio - kTol ||
          (std::abs(ratio - best_ratio) <= kTol && basis[i] < basis[leave])) {
        leave = i;
        best_ratio = ratio;
      }
    }
    if (leave < 0) throw std::runtime_error("maximize_over_box_cone: unbounded (should not happen)");
    t.row(leave) /= t(leave, enter);
    for (Index i = 0; i <= rows; ++i) {
      if (i == leave) continue;
      const double f = t(i, enter);
      if (f != 0.0) t.row(i) -= f * t.row(leave);
    }
    basis[leave] = enter;
  }

  BoxConeLpResult out;
  VectorXd split = VectorXd::Zero(vars);
  for (Index i = 0; i < rows; ++i) split[basis[i]] = t(i, vars);
  out.x = split.segment(0, q) - split.segment(q, q);
  out.value = objective.dot(out.x);
  return out;
}

}  // namespace mixcs
