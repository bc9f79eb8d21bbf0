#include "mixcs/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mixcs {

std::string to_string(SolveStrategy strategy) {
  switch (strategy) {
    case SolveStrategy::SubspaceLeastSquares: return "subspace-ls";
    case SolveStrategy::UnionLeastSquares: return "union-ls";
    case SolveStrategy::HardThresholding: return "iht-debias";
    case SolveStrategy::LatentDescent: return "latent-descent";
  }
  return "unknown";
}

double spectral_norm_estimate(const Eigen::Ref<const MatrixXd>& m, int iterations, Seed seed) {
  if (m.cols() == 0 || m.rows() == 0) return 0.0;
  Rng rng(seed);
  VectorXd v = random_unit_vector(rng, m.cols());
  double sigma = 0.0;
  for (int it = 0; it < iterations; ++it) {
    const VectorXd w = m.transpose() * (m * v);
    const double norm = w.norm();
    if (!(norm > 0.0)) return 0.0;
    v = w / norm;
    sigma = std::sqrt(norm);
  }
  return sigma;
}

VectorXd least_squares_on_support(const Eigen::Ref<const VectorXd>& y, const Eigen::Ref<const MatrixXd>& m,
                                  const std::vector<Index>& support) {
  VectorXd x = VectorXd::Zero(m.cols());
  if (support.empty()) return x;
  MatrixXd sub(m.rows(), static_cast<Index>(support.size()));
  for (std::size_t j = 0; j < support.size(); ++j) sub.col(static_cast<Index>(j)) = m.col(support[j]);
  const VectorXd coef = sub.completeOrthogonalDecomposition().solve(y);
  for (std::size_t j = 0; j < support.size(); ++j) x[support[j]] = coef[static_cast<Index>(j)];
  return x;
}

namespace {

double objective_of(const Eigen::Ref<const VectorXd>& y, const Eigen::Ref<const MatrixXd>& m, const VectorXd& x) {
  return (y - m * x).squaredNorm();
}

struct MemberFit {
  VectorXd x;
  double objective = 0.0;
};

MemberFit fit_subspace(const Eigen::Ref<const VectorXd>& y, const Eigen::Ref<const MatrixXd>& m,
                       const MatrixXd& basis) {
  const MatrixXd mb = m * basis;
  const VectorXd coef = mb.completeOrthogonalDecomposition().solve(y);
  MemberFit fit;
  fit.x = basis * coef;
  fit.objective = objective_of(y, m, fit.x);
  return fit;
}

// Minimum least-squares objective over every support of size s.
double exhaustive_sparse_objective(const Eigen::Ref<const VectorXd>& y, const Eigen::Ref<const MatrixXd>& m,
                                   Index s) {
  const Index n = m.cols();
  s = std::min(s, n);
  std::vector<Index> support(static_cast<std::size_t>(s));
  for (Index i = 0; i < s; ++i) support[i] = i;
  double best = std::numeric_limits<double>::infinity();
  for (;;) {
    best = std::min(best, objective_of(y, m, least_squares_on_support(y, m, support)));
    Index i = s - 1;
    while (i >= 0 && support[i] == n - s + i) --i;
    if (i < 0) break;
    ++support[i];
    for (Index j = i + 1; j < s; ++j) support[j] = support[j - 1] + 1;
  }
  return best;
}

std::vector<Index> nonzero_support(const VectorXd& x) {
  std::vector<Index> s;
  for (Index i = 0; i < x.size(); ++i)
    if (x[i] != 0.0) s.push_back(i);
  return s;
}

// Hard thresholding pursuit: gradient step, threshold, least squares on the
// new support; stops at the first step that does not lower the objective.
void polish_support(const Eigen::Ref<const VectorXd>& y, const Eigen::Ref<const MatrixXd>& m, Index s, double mu,
                    int max_iterations, VectorXd& x, double& f) {
  for (int it = 0; it < max_iterations; ++it) {
    const VectorXd grad = m.transpose() * (y - m * x);
    const std::vector<Index> support = top_support(VectorXd(x + mu * grad), s);
    const VectorXd cand = least_squares_on_support(y, m, support);
    const double fc = objective_of(y, m, cand);
    if (!(fc < f)) break;
    x = cand;
    f = fc;
  }
  // Single swaps: replace one support index by an outside one while the
  // least-squares objective improves (best swap per pass, first on ties).
  const Index n = m.cols();
  for (int pass = 0; pass < max_iterations; ++pass) {
    std::vector<Index> support = top_support(x, s);
    std::vector<bool> inside(static_cast<std::size_t>(n), false);
    for (Index i : support) inside[static_cast<std::size_t>(i)] = true;
    VectorXd best_x;
    double best_f = f;
    for (std::size_t slot = 0; slot < support.size(); ++slot) {
      for (Index j = 0; j < n; ++j) {
        if (inside[static_cast<std::size_t>(j)]) continue;
        std::vector<Index> trial = support;
        trial[slot] = j;
        std::sort(trial.begin(), trial.end());
        VectorXd cand = least_squares_on_support(y, m, trial);
        const double fc = objective_of(y, m, cand);
        if (fc < best_f) {
          best_f = fc;
          best_x = std::move(cand);
        }
      }
    }
    if (!(best_f < f)) break;
    x = std::move(best_x);
    f = best_f;
  }
}

SolveReport solve_sparse(const Eigen::Ref<const VectorXd>& y, const Eigen::Ref<const MatrixXd>& m, Index s,
                         const SolveOptions& opts) {
  SolveReport rep;
  rep.strategy = SolveStrategy::HardThresholding;
  const Index n = m.cols();
  const double sigma = spectral_norm_estimate(m, opts.power_iterations, derive_seed(opts.seed, 0));
  VectorXd x = VectorXd::Zero(n);
  double f = y.squaredNorm();
  if (sigma > 0.0) {
    const double mu = 1.0 / (sigma * sigma);
    int it = 0;
    for (; it < opts.max_iterations; ++it) {
      const VectorXd grad = m.transpose() * (y - m * x);
      // mu <= 1/||M||^2 makes each step a descent step; the power-iteration
      // estimate can undershoot ||M||, in which case the step is halved.
      double step = mu;
      VectorXd x_new = hard_threshold(VectorXd(x + step * grad), s);
      double f_new = objective_of(y, m, x_new);
      while (f_new > f && step > mu * 1e-6) {
        step *= 0.5;
        x_new = hard_threshold(VectorXd(x + step * grad), s);
        f_new = objective_of(y, m, x_new);
      }
      if (f_new > f) {
        rep.converged = true;
        break;
      }
      rep.objective_trace.push_back(f_new);
      const double decrease = f - f_new;
      x = std::move(x_new);
      f = f_new;
      if (f == 0.0 || decrease <= opts.rel_tol * (f + decrease)) {
        rep.converged = true;
        ++it;
        break;
      }
    }
    rep.iterations = it;
  } else {
    rep.converged = true;
  }

  // Debias: least squares on the identified support.
  const VectorXd debiased = least_squares_on_support(y, m, nonzero_support(x));
  const double f_debiased = objective_of(y, m, debiased);
  if (f_debiased <= f) {
    x = debiased;
    f = f_debiased;
  }
  if (sigma > 0.0) {
    const double mu = 1.0 / (sigma * sigma);
    polish_support(y, m, s, mu, opts.max_iterations, x, f);
    // Extra starts from random supports; the lowest index wins ties.
    Rng rng(derive_seed(opts.seed, 1));
    for (int r = 1; r < opts.restarts; ++r) {
      std::vector<Index> perm(static_cast<std::size_t>(n));
      for (Index i = 0; i < n; ++i) perm[i] = i;
      std::shuffle(perm.begin(), perm.end(), rng);
      std::vector<Index> support(perm.begin(), perm.begin() + std::min(s, n));
      std::sort(support.begin(), support.end());
      VectorXd xr = least_squares_on_support(y, m, support);
      double fr = objective_of(y, m, xr);
      polish_support(y, m, s, mu, opts.max_iterations, xr, fr);
      if (fr < f) {
        x = std::move(xr);
        f = fr;
      }
    }
  }
  rep.xhat = std::move(x);
  rep.objective = f;

  if (n <= opts.exhaustive_max_n) {
    rep.gap_upper = std::max(0.0, rep.objective - exhaustive_sparse_objective(y, m, s));
    rep.gap_certified = true;
  } else {
    rep.gap_upper = 0.0;
    rep.gap_certified = false;
  }
  return rep;
}

}  // namespace

SolveReport solve_lasso(const Eigen::Ref<const VectorXd>& y, const Eigen::Ref<const MatrixXd>& m,
                        const StructureSet& set, const SolveOptions& opts) {
  if (m.rows() != y.size()) throw std::invalid_argument("solve_lasso: M rows must match y");
  if (m.cols() != set.ambient) throw std::invalid_argument("solve_lasso: M columns must match ambient dimension");
  if (!y.allFinite() || !m.allFinite()) throw std::domain_error("solve_lasso: non-finite entries in y or M");
  if (opts.max_iterations < 1) throw std::invalid_argument("solve_lasso: iteration budget must be positive");

  return std::visit(
      [&](const auto& s) -> SolveReport {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, SparseCone>) {
          return solve_sparse(y, m, s.sparsity, opts);
        } else if constexpr (std::is_same_v<S, Subspace>) {
          SolveReport rep;
          rep.strategy = SolveStrategy::SubspaceLeastSquares;
          MemberFit fit = fit_subspace(y, m, s.basis);
          rep.xhat = std::move(fit.x);
          rep.objective = fit.objective;
          rep.converged = true;
          rep.iterations = 1;
          return rep;
        } else if constexpr (std::is_same_v<S, UnionOfSubspaces>) {
          if (static_cast<Index>(s.bases.size()) > opts.max_union_members)
            throw std::invalid_argument("solve_lasso: union has too many members for exact search");
          std::vector<MemberFit> fits(s.bases.size());
          parallel_for(fits.size(), opts.threads, [&](std::size_t i) { fits[i] = fit_subspace(y, m, s.bases[i]); });
          std::size_t best = 0;
          for (std::size_t i = 1; i < fits.size(); ++i)
            if (fits[i].objective < fits[best].objective) best = i;
          SolveReport rep;
          rep.strategy = SolveStrategy::UnionLeastSquares;
          rep.xhat = std::move(fits[best].x);
          rep.objective = fits[best].objective;
          rep.converged = true;
          rep.iterations = static_cast<int>(fits.size());
          return rep;
        } else {
          LatentFitOptions fit;
          fit.restarts = opts.restarts;
          fit.audit_restarts = opts.audit_restarts;
          fit.max_iterations = opts.max_iterations;
          fit.rel_tol = opts.rel_tol;
          fit.seed = opts.seed;
          fit.threads = opts.threads;
          const LatentFitResult r = fit_latent(s.model, m, y, fit);
          SolveReport rep;
          rep.strategy = SolveStrategy::LatentDescent;
          rep.xhat = r.output;
          rep.objective = r.objective;
          rep.gap_upper = std::max(0.0, r.objective - r.audit_best);
          rep.gap_certified = false;
          rep.iterations = r.iterations;
          rep.converged = r.converged;
          return rep;
        }
      },
      set.variant);
}

SolveReport solve_with_gap_target(const Eigen::Ref<const VectorXd>& y, const Eigen::Ref<const MatrixXd>& m,
                                  const StructureSet& set, double eps_target, const SolveOptions& opts) {
  if (!(eps_target >= 0.0)) throw std::invalid_argument("solve_with_gap_target: eps target must be >= 0");
  constexpr int kRounds = 4;
  SolveOptions round_opts = opts;
  SolveReport best;
  bool have_best = false;
  for (int round = 0; round < kRounds; ++round) {
    SolveReport rep = solve_lasso(y, m, set, round_opts);
    if (rep.eps() <= eps_target) {
      rep.converged = true;
      return rep;
    }
    if (!have_best || rep.objective < best.objective) {
      best = std::move(rep);
      have_best = true;
    }
    round_opts.max_iterations *= 2;
    round_opts.restarts *= 2;
    round_opts.audit_restarts *= 2;
  }
  best.converged = false;
  return best;
}

}  // namespace mixcs
