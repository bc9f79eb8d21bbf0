#include "mixcs/geometry.hpp"

#include "mixcs/ensembles.hpp"
#include "mixcs/lp.hpp"

#include <cmath>
#include <numbers>
#include <optional>
#include <set>
#include <stdexcept>

namespace mixcs {

std::string to_string(WidthTarget target) { return target == WidthTarget::Set ? "set" : "difference"; }

WidthTarget parse_width_target(const std::string& name) {
  if (name == "set") return WidthTarget::Set;
  if (name == "difference") return WidthTarget::Difference;
  throw std::invalid_argument("unknown width target '" + name + "' (expected set|difference)");
}

std::string to_string(SupSolver solver) { return solver == SupSolver::Exact ? "exact" : "latent-approx"; }

double subspace_width(Index d) {
  const double h = static_cast<double>(d);
  return std::sqrt(2.0) * std::exp(std::lgamma((h + 1.0) / 2.0) - std::lgamma(h / 2.0));
}

std::vector<MatrixXd> pairwise_sum_bases(const std::vector<MatrixXd>& bases) {
  if (bases.size() == 1) return bases;
  std::vector<MatrixXd> out;
  out.reserve(bases.size() * (bases.size() - 1) / 2);
  for (std::size_t i = 0; i < bases.size(); ++i) {
    for (std::size_t j = i + 1; j < bases.size(); ++j) {
      MatrixXd stacked(bases[i].rows(), bases[i].cols() + bases[j].cols());
      stacked << bases[i], bases[j];
      out.push_back(column_span_basis(stacked));
    }
  }
  return out;
}

namespace {

double top_s_norm(const VectorXd& g, Index s) {
  double sum = 0.0;
  for (Index i : top_support(g, s)) sum += g[i] * g[i];
  return std::sqrt(sum);
}

double max_projection_norm(const std::vector<MatrixXd>& bases, const VectorXd& g) {
  double best = 0.0;
  for (const auto& b : bases) best = std::max(best, (b.transpose() * g).norm());
  return best;
}

// Normalized inner product <v, g>/||v|| and its gradient direction in v.
struct Alignment {
  double value = -std::numeric_limits<double>::infinity();
  VectorXd dv;
};

Alignment alignment(const VectorXd& v, const VectorXd& g) {
  Alignment a;
  const double norm = v.norm();
  if (!(norm > 0.0)) return a;
  const double inner = v.dot(g);
  a.value = inner / norm;
  a.dv = g / norm - (inner / (norm * norm * norm)) * v;
  return a;
}

// Latent search for sup over ran(G) ∩ S (pair = false) or over
// (ran(G) - ran(G)) ∩ S (pair = true) of <v, g>. Returns a lower estimate.
class LatentSup {
 public:
  LatentSup(const GnnModel& model, const WidthOptions& opts) : model_(model), opts_(opts) {}

  double set_sup(const VectorXd& g, Rng& rng, VectorXd* best_z) const {
    const Index k = model_.latent_dim();
    double best = -std::numeric_limits<double>::infinity();
    for (int r = 0; r < opts_.restarts; ++r) {
      VectorXd z = gaussian_vector(rng, k);
      const double value = ascend(z, VectorXd(), g);
      if (value > best) {
        best = value;
        if (best_z) *best_z = z;
      }
    }
    return best;
  }

  double difference_sup(const VectorXd& g, Rng& rng) const {
    const Index k = model_.latent_dim();
    VectorXd z1;
    double best = set_sup(g, rng, &z1);
    if (z1.size() == k) {
      // T ⊂ T - T through the pair (z, 0); refine from there.
      VectorXd z2 = VectorXd::Zero(k);
      best = std::max(best, ascend(z1, z2, g));
    }
    for (int r = 0; r < opts_.restarts; ++r) {
      VectorXd a = gaussian_vector(rng, k);
      VectorXd b = gaussian_vector(rng, k);
      best = std::max(best, ascend(a, b, g));
    }
    return best;
  }

 private:
  // Evaluates <v, g>/||v|| for v = G(z1) - G(z2) (or G(z1) if z2 is empty).
  double value_at(const VectorXd& z1, const VectorXd& z2, const VectorXd& g) const {
    VectorXd v = gnn_forward(model_, z1);
    if (z2.size()) v -= gnn_forward(model_, z2);
    return alignment(v, g).value;
  }

  double ascend(VectorXd& z1, VectorXd z2, const VectorXd& g) const {
    const bool pair = z2.size() > 0;
    double f = value_at(z1, z2, g);
    for (int it = 0; it < opts_.max_iterations; ++it) {
      const ForwardTrace t1 = gnn_trace(model_, z1);
      VectorXd v = t1.output;
      ForwardTrace t2;
      if (pair) {
        t2 = gnn_trace(model_, z2);
        v -= t2.output;
      }
      const Alignment a = alignment(v, g);
      if (!std::isfinite(a.value)) break;
      VectorXd g1 = t1.jacobian.transpose() * a.dv;
      VectorXd g2 = pair ? VectorXd(-t2.jacobian.transpose() * a.dv) : VectorXd();
      const double scale = std::sqrt(z1.squaredNorm() + (pair ? z2.squaredNorm() : 0.0));
      const double gnorm = std::sqrt(g1.squaredNorm() + (pair ? g2.squaredNorm() : 0.0));
      if (!(gnorm > 0.0) || !(scale > 0.0)) break;
      double step = scale / gnorm;
      bool improved = false;
      while (step > 1e-10 * scale / gnorm) {
        VectorXd n1 = z1 + step * g1;
        VectorXd n2 = pair ? VectorXd(z2 + step * g2) : VectorXd();
        const double fn = value_at(n1, n2, g);
        if (fn > f) {
          z1 = std::move(n1);
          z2 = std::move(n2);
          f = fn;
          improved = true;
          break;
        }
        step *= 0.5;
      }
      if (!improved) break;
    }
    return f;
  }

  const GnnModel& model_;
  WidthOptions opts_;
};

}  // namespace

WidthEstimate width_mc(const StructureSet& set, WidthTarget target, Index num_gaussians, Seed seed,
                       const WidthOptions& opts) {
  if (num_gaussians < 100) throw std::invalid_argument("width_mc: need at least 100 Gaussian draws");
  validate(set);
  const Index n = set.ambient;
  WidthEstimate est;
  est.num_gaussians = num_gaussians;
  est.sup_solver = set.is_exact() ? SupSolver::Exact : SupSolver::LatentApprox;

  std::vector<MatrixXd> members;
  if (const auto* u = std::get_if<UnionOfSubspaces>(&set.variant))
    members = target == WidthTarget::Set ? u->bases : pairwise_sum_bases(u->bases);
  const GnnRange* gnn = std::get_if<GnnRange>(&set.variant);
  if (gnn && opts.restarts < 1) throw std::invalid_argument("width_mc: latent-approx needs at least one restart");
  std::optional<LatentSup> latent;
  if (gnn) latent.emplace(gnn->model, opts);

  std::vector<double> sups(static_cast<std::size_t>(num_gaussians));
  parallel_for(sups.size(), opts.threads, [&](std::size_t i) {
    Rng rng(derive_seed(seed, i));
    const VectorXd g = gaussian_vector(rng, n);
    double value = 0.0;
    if (const auto* sc = std::get_if<SparseCone>(&set.variant)) {
      const Index s = target == WidthTarget::Set ? sc->sparsity : std::min(2 * sc->sparsity, n);
      value = top_s_norm(g, s);
    } else if (const auto* sub = std::get_if<Subspace>(&set.variant)) {
      value = (sub->basis.transpose() * g).norm();
    } else if (!members.empty()) {
      value = max_projection_norm(members, g);
    } else {
      Rng search(derive_seed(seed ^ 0x5bd1e995ULL, i));
      value = target == WidthTarget::Set ? latent->set_sup(g, search, nullptr) : latent->difference_sup(g, search);
      if (!std::isfinite(value)) value = 0.0;
    }
    sups[i] = value;
  });
  const MeanStderr ms = mean_and_stderr(sups);
  est.mean = ms.mean;
  est.std_error = ms.std_error;
  return est;
}

WidthEstimate width_of_points(const MatrixXd& points, Index num_gaussians, Seed seed) {
  if (points.cols() < 1) throw std::invalid_argument("width_of_points: empty point set");
  WidthEstimate est;
  est.num_gaussians = num_gaussians;
  // E <r, g> = 0 for a single point.
  if (points.cols() == 1) return est;
  if (num_gaussians < 100) throw std::invalid_argument("width_of_points: need at least 100 Gaussian draws");
  std::vector<double> sups(static_cast<std::size_t>(num_gaussians));
  for (std::size_t i = 0; i < sups.size(); ++i) {
    Rng rng(derive_seed(seed, i));
    sups[i] = (points.transpose() * gaussian_vector(rng, points.rows())).maxCoeff();
  }
  const MeanStderr ms = mean_and_stderr(sups);
  est.mean = ms.mean;
  est.std_error = ms.std_error;
  return est;
}

GnnWidthBound gnn_width_bound(Index k, const std::vector<Index>& layer_widths) {
  if (k < 1) throw std::invalid_argument("gnn_width_bound: k must be >= 1");
  if (layer_widths.empty()) throw std::invalid_argument("gnn_width_bound: need at least one layer");
  GnnWidthBound out;
  const double kd = static_cast<double>(k);
  const double d = static_cast<double>(layer_widths.size());
  double sum_log = 0.0;
  for (Index p : layer_widths) {
    if (p < 1) throw std::invalid_argument("gnn_width_bound: layer widths must be >= 1");
    if (k > p) out.flagged = true;
    sum_log += std::log(static_cast<double>(p));
  }
  const double log_2e_over_k = std::log(2.0) + 1.0 - std::log(kd);
  out.log_region_count_bound = kd * (d * log_2e_over_k + sum_log);
  out.region_count_bound = std::exp(out.log_region_count_bound);
  out.geometric_mean_width = std::exp(sum_log / d);
  double log_term = log_2e_over_k + sum_log / d;  // log(2e p'/k)
  if (log_term < 0.0) {
    out.flagged = true;
    log_term = 0.0;
  }
  out.width_bound = std::sqrt(2.0 * kd) + std::sqrt(2.0 * kd * d * log_term);
  return out;
}

bool orthant_meets_subspace(const MatrixXd& basis, const Eigen::VectorXi& signs) {
  if (signs.size() != basis.rows()) throw std::invalid_argument("orthant: sign vector length mismatch");
  // maximize sum_i s_i v_i  s.t.  s_i v_i >= 0,  v = basis c,  |c_j| <= 1
  MatrixXd signed_basis = basis;
  for (Index i = 0; i < basis.rows(); ++i) signed_basis.row(i) *= static_cast<double>(signs[i]);
  const VectorXd objective = signed_basis.colwise().sum().transpose();
  const BoxConeLpResult lp = maximize_over_box_cone(-signed_basis, objective);
  return lp.value > 1e-9;
}

std::int64_t count_orthants(const MatrixXd& basis, OrthantMode mode, Index samples, Seed seed) {
  const Index n = basis.rows();
  const Index k = basis.cols();
  if (n < 1 || k < 1) throw std::invalid_argument("count_orthants: empty basis");
  if (mode == OrthantMode::Exhaustive) {
    if (n > kMaxExhaustiveOrthantDim)
      throw std::invalid_argument("count_orthants: exhaustive mode limited to n <= 20");
    std::int64_t count = 0;
    Eigen::VectorXi signs(n);
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
      for (Index i = 0; i < n; ++i) signs[i] = (mask >> i) & 1U ? -1 : 1;
      if (orthant_meets_subspace(basis, signs)) ++count;
    }
    return count;
  }
  if (samples < 1) throw std::invalid_argument("count_orthants: sampled mode needs samples >= 1");
  Rng rng(seed);
  std::set<std::vector<int>> seen;
  for (Index s = 0; s < samples; ++s) {
    const VectorXd v = basis * gaussian_vector(rng, k);
    std::vector<int> key(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) key[i] = v[i] >= 0.0 ? 1 : -1;
    seen.insert(std::move(key));
  }
  std::int64_t count = 0;
  for (const auto& key : seen) {
    const Eigen::VectorXi signs = Eigen::Map<const Eigen::VectorXi>(key.data(), n);
    if (orthant_meets_subspace(basis, signs)) ++count;
  }
  return count;
}

Index relu_image_dim(const MatrixXd& basis, const Eigen::VectorXi& signs) {
  if (signs.size() != basis.rows()) throw std::invalid_argument("relu_image_dim: sign vector length mismatch");
  MatrixXd masked = basis;
  for (Index i = 0; i < basis.rows(); ++i)
    if (signs[i] <= 0) masked.row(i).setZero();
  if (masked.size() == 0) return 0;
  Eigen::JacobiSVD<MatrixXd> svd(masked);
  return numerical_rank(svd.singularValues());
}

UnionWidthCheck union_width_check(const std::vector<MatrixXd>& bases, Index num_gaussians, Seed seed) {
  if (bases.empty()) throw std::invalid_argument("union_width_check: no members");
  if (num_gaussians < 100) throw std::invalid_argument("union_width_check: need at least 100 Gaussian draws");
  const Index n = bases.front().rows();
  const std::size_t members = bases.size();
  std::vector<std::vector<double>> per_member(members, std::vector<double>(static_cast<std::size_t>(num_gaussians)));
  std::vector<double> unions(static_cast<std::size_t>(num_gaussians));
  for (std::size_t i = 0; i < unions.size(); ++i) {
    Rng rng(derive_seed(seed, i));
    const VectorXd g = gaussian_vector(rng, n);
    double best = 0.0;
    for (std::size_t j = 0; j < members; ++j) {
      per_member[j][i] = (bases[j].transpose() * g).norm();
      best = std::max(best, per_member[j][i]);
    }
    unions[i] = best;
  }
  UnionWidthCheck out;
  const MeanStderr u = mean_and_stderr(unions);
  out.lhs = u.mean;
  out.lhs_std_error = u.std_error;
  for (const auto& m : per_member) out.max_width = std::max(out.max_width, mean_and_stderr(m).mean);
  out.sqrt_log_n = std::sqrt(std::log(static_cast<double>(members)));
  return out;
}

UnionWidthCheck union_width_check(const std::vector<Index>& dims, Index n, Index num_gaussians, Seed seed) {
  Rng rng(derive_seed(seed, 0xB0A5E5ULL));
  std::vector<MatrixXd> bases;
  for (Index d : dims) bases.push_back(random_orthonormal_basis(rng, n, d));
  return union_width_check(bases, num_gaussians, seed);
}

double oversampling_factor(const MatrixXd& b, double width) {
  if (!(width > 0.0)) throw std::domain_error("oversampling_factor: width must be positive");
  return stable_rank(b) / (width * width);
}

}  // namespace mixcs
