#include "mixcs/structures.hpp"

#include "mixcs/lp.hpp"

#include <numeric>
#include <sstream>
#include <stdexcept>

namespace mixcs {

namespace {

constexpr double kOrthonormalTol = 1e-10;

void check_orthonormal(const MatrixXd& basis, Index n, const char* what) {
  if (basis.rows() != n) throw std::invalid_argument(std::string(what) + ": basis has wrong ambient dimension");
  if (basis.cols() < 1 || basis.cols() > n) throw std::invalid_argument(std::string(what) + ": basis has invalid dimension");
  const MatrixXd gram = basis.transpose() * basis;
  if ((gram - MatrixXd::Identity(basis.cols(), basis.cols())).cwiseAbs().maxCoeff() > kOrthonormalTol)
    throw std::invalid_argument(std::string(what) + ": basis is not orthonormal");
}

Projection project_subspace(const MatrixXd& basis, const Eigen::Ref<const VectorXd>& v) {
  Projection p;
  p.point = basis * (basis.transpose() * v);
  p.distance = (v - p.point).norm();
  return p;
}

}  // namespace

StructureSet make_sparse_cone(Index n, Index sparsity) {
  StructureSet set{SparseCone{sparsity}, n};
  validate(set);
  return set;
}

StructureSet make_subspace(MatrixXd basis) {
  const Index n = basis.rows();
  StructureSet set{Subspace{std::move(basis)}, n};
  validate(set);
  return set;
}

StructureSet make_union(std::vector<MatrixXd> bases) {
  if (bases.empty()) throw std::invalid_argument("union: no members");
  const Index n = bases.front().rows();
  StructureSet set{UnionOfSubspaces{std::move(bases)}, n};
  validate(set);
  return set;
}

StructureSet make_gnn_range(GnnModel model) {
  const Index n = model.output_dim();
  StructureSet set{GnnRange{std::move(model)}, n};
  validate(set);
  return set;
}

void validate(const StructureSet& set) {
  if (set.ambient < 1) throw std::invalid_argument("structure: ambient dimension must be >= 1");
  std::visit(
      [&](const auto& s) {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, SparseCone>) {
          if (s.sparsity < 1 || s.sparsity > set.ambient)
            throw std::invalid_argument("sparse cone: need 1 <= s <= n");
        } else if constexpr (std::is_same_v<S, Subspace>) {
          check_orthonormal(s.basis, set.ambient, "subspace");
        } else if constexpr (std::is_same_v<S, UnionOfSubspaces>) {
          if (s.bases.empty()) throw std::invalid_argument("union: no members");
          for (const auto& b : s.bases) check_orthonormal(b, set.ambient, "union member");
        } else {
          validate(s.model);
          if (s.model.output_dim() != set.ambient)
            throw std::invalid_argument("gnn range: output dimension differs from ambient dimension");
        }
      },
      set.variant);
}

std::string describe(const StructureSet& set) {
  std::ostringstream os;
  std::visit(
      [&](const auto& s) {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, SparseCone>) {
          os << "sparse(n=" << set.ambient << ";s=" << s.sparsity << ")";
        } else if constexpr (std::is_same_v<S, Subspace>) {
          os << "subspace(n=" << set.ambient << ";d=" << s.basis.cols() << ")";
        } else if constexpr (std::is_same_v<S, UnionOfSubspaces>) {
          os << "union(n=" << set.ambient << ";members=" << s.bases.size() << ";dims=";
          for (std::size_t i = 0; i < s.bases.size(); ++i) os << (i ? "/" : "") << s.bases[i].cols();
          os << ")";
        } else {
          os << "gnn(dims=";
          const auto dims = s.model.dims();
          for (std::size_t i = 0; i < dims.size(); ++i) os << (i ? "/" : "") << dims[i];
          os << ";leak=" << s.model.leak << ")";
        }
      },
      set.variant);
  return os.str();
}

std::vector<Index> top_support(const Eigen::Ref<const VectorXd>& v, Index s) {
  std::vector<Index> idx(static_cast<std::size_t>(v.size()));
  std::iota(idx.begin(), idx.end(), Index{0});
  s = std::clamp<Index>(s, 0, v.size());
  std::stable_sort(idx.begin(), idx.end(), [&](Index a, Index b) { return std::abs(v[a]) > std::abs(v[b]); });
  idx.resize(static_cast<std::size_t>(s));
  std::sort(idx.begin(), idx.end());
  return idx;
}

Projection project(const StructureSet& set, const Eigen::Ref<const VectorXd>& v, const ProjectOptions& opts) {
  if (v.size() != set.ambient) throw std::invalid_argument("project: dimension mismatch");
  return std::visit(
      [&](const auto& s) -> Projection {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, SparseCone>) {
          Projection p;
          p.point = hard_threshold(v, s.sparsity);
          p.distance = (v - p.point).norm();
          return p;
        } else if constexpr (std::is_same_v<S, Subspace>) {
          return project_subspace(s.basis, v);
        } else if constexpr (std::is_same_v<S, UnionOfSubspaces>) {
          Projection best = project_subspace(s.bases.front(), v);
          for (std::size_t i = 1; i < s.bases.size(); ++i) {
            Projection p = project_subspace(s.bases[i], v);
            if (p.distance < best.distance) best = std::move(p);
          }
          return best;
        } else {
          if (opts.restarts < 1) throw std::invalid_argument("project: gnn range needs at least one restart");
          LatentFitOptions fit;
          fit.restarts = opts.restarts;
          fit.audit_restarts = opts.audit_restarts;
          fit.max_iterations = opts.max_iterations;
          fit.rel_tol = opts.rel_tol;
          fit.seed = opts.seed;
          fit.threads = opts.threads;
          const LatentFitResult r = fit_latent(s.model, v, fit);
          Projection p;
          p.point = r.output;
          p.distance = std::sqrt(r.objective);
          p.gap = std::max(0.0, p.distance - std::sqrt(r.audit_best));
          return p;
        }
      },
      set.variant);
}

double distance(const StructureSet& set, const Eigen::Ref<const VectorXd>& x, const ProjectOptions& opts) {
  return project(set, x, opts).distance;
}

VectorXd sample_point(const StructureSet& set, Rng& rng, bool normalize) {
  constexpr int kMaxAttempts = 100;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    VectorXd x = std::visit(
        [&](const auto& s) -> VectorXd {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, SparseCone>) {
            std::vector<Index> idx(static_cast<std::size_t>(set.ambient));
            std::iota(idx.begin(), idx.end(), Index{0});
            VectorXd out = VectorXd::Zero(set.ambient);
            for (Index i = 0; i < s.sparsity; ++i) {
              std::uniform_int_distribution<Index> pick(i, set.ambient - 1);
              std::swap(idx[i], idx[pick(rng)]);
            }
            const VectorXd vals = gaussian_vector(rng, s.sparsity);
            for (Index i = 0; i < s.sparsity; ++i) out[idx[i]] = vals[i];
            return out;
          } else if constexpr (std::is_same_v<S, Subspace>) {
            return s.basis * gaussian_vector(rng, s.basis.cols());
          } else if constexpr (std::is_same_v<S, UnionOfSubspaces>) {
            std::uniform_int_distribution<std::size_t> pick(0, s.bases.size() - 1);
            const MatrixXd& b = s.bases[pick(rng)];
            return b * gaussian_vector(rng, b.cols());
          } else {
            return gnn_forward(s.model, gaussian_vector(rng, s.model.latent_dim()));
          }
        },
        set.variant);
    const double norm = x.norm();
    if (norm > 0.0) return normalize ? VectorXd(x / norm) : x;
  }
  throw std::domain_error("sample_point: only zero vectors drawn after 100 attempts");
}

namespace {

constexpr double kRegionMargin = 1e-9;

class RegionEnumerator {
 public:
  explicit RegionEnumerator(const GnnModel& model) : model_(model), k_(model.latent_dim()) {}

  std::vector<LinearRegion> run() {
    ActivationPattern pattern;
    const MatrixXd identity = MatrixXd::Identity(k_, k_);
    start_layer(0, identity, pattern, MatrixXd(0, k_ + 1), VectorXd::Zero(k_));
    return std::move(regions_);
  }

 private:
  void start_layer(std::size_t layer, const MatrixXd& input_map, ActivationPattern& pattern,
                   const MatrixXd& constraints, const VectorXd& witness) {
    if (layer == model_.weights.size()) {
      LinearRegion region;
      region.pattern = pattern;
      region.basis = column_span_basis(input_map);
      region.witness = witness;
      regions_.push_back(std::move(region));
      return;
    }
    const MatrixXd pre = model_.weights[layer] * input_map;
    std::vector<bool> bits;
    branch_unit(layer, 0, pre, bits, pattern, constraints, witness);
  }

  void branch_unit(std::size_t layer, Index unit, const MatrixXd& pre, std::vector<bool>& bits,
                   ActivationPattern& pattern, const MatrixXd& constraints, const VectorXd& witness) {
    if (unit == pre.rows()) {
      MatrixXd post = pre;
      for (Index j = 0; j < pre.rows(); ++j)
        if (!bits[static_cast<std::size_t>(j)]) post.row(j) *= model_.leak;
      pattern.push_back(bits);
      start_layer(layer + 1, post, pattern, constraints, witness);
      pattern.pop_back();
      return;
    }
    // A unit whose pre-activation is identically zero is inactive everywhere.
    if (pre.row(unit).lpNorm<Eigen::Infinity>() <= 1e-12 * (1.0 + pre.lpNorm<Eigen::Infinity>())) {
      bits.push_back(false);
      branch_unit(layer, unit + 1, pre, bits, pattern, constraints, witness);
      bits.pop_back();
      return;
    }
    for (bool active : {false, true}) {
      MatrixXd next(constraints.rows() + 1, k_ + 1);
      next.topRows(constraints.rows()) = constraints;
      // Both sides keep a margin t so the witness is strictly interior.
      if (active) {
        // pre . z >= t
        next.row(constraints.rows()) << -pre.row(unit), 1.0;
      } else {
        // pre . z <= -t
        next.row(constraints.rows()) << pre.row(unit), 1.0;
      }
      VectorXd objective = VectorXd::Zero(k_ + 1);
      objective[k_] = 1.0;
      const BoxConeLpResult lp = maximize_over_box_cone(next, objective);
      if (lp.value < kRegionMargin) continue;
      bits.push_back(active);
      branch_unit(layer, unit + 1, pre, bits, pattern, next, lp.x.head(k_));
      bits.pop_back();
    }
  }

  const GnnModel& model_;
  Index k_;
  std::vector<LinearRegion> regions_;
};

}  // namespace

std::vector<LinearRegion> enumerate_regions(const GnnModel& model) {
  validate(model);
  if (model.latent_dim() > kMaxRegionLatentDim)
    throw std::invalid_argument("enumerate_regions: latent dimension above desk-scale limit of 3");
  Index units = 0;
  for (const auto& w : model.weights) units += w.rows();
  if (units > kMaxRegionUnits)
    throw std::invalid_argument("enumerate_regions: more than 20 units exceeds desk-scale limit");
  return RegionEnumerator(model).run();
}

}  // namespace mixcs
