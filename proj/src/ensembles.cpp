#include "mixcs/ensembles.hpp"

#include <cmath>
#include <sstream>

namespace mixcs {

namespace {

const std::vector<double>* spectrum_of(const MixingSpec& spec) {
  if (const auto* d = std::get_if<DiagonalSpectrum>(&spec.kind)) return &d->sigma;
  if (const auto* r = std::get_if<RotatedSpectrum>(&spec.kind)) return &r->sigma;
  return nullptr;
}

MatrixXd padded_diagonal(const std::vector<double>& sigma, Index rows, Index cols) {
  MatrixXd d = MatrixXd::Zero(rows, cols);
  for (std::size_t i = 0; i < sigma.size(); ++i) d(static_cast<Index>(i), static_cast<Index>(i)) = sigma[i];
  return d;
}

}  // namespace

MixingSpec identity_mixing(Index size) { return MixingSpec{size, size, IdentityMixing{}}; }

void validate(const MixingSpec& spec) {
  if (spec.rows < 1 || spec.cols < 1) throw std::invalid_argument("mixing: dimensions must be positive");
  if (std::holds_alternative<IdentityMixing>(spec.kind) && spec.rows != spec.cols)
    throw std::invalid_argument("mixing: identity requires rows == cols");
  if (const auto* e = std::get_if<ExplicitMixing>(&spec.kind)) {
    if (e->matrix.rows() != spec.rows || e->matrix.cols() != spec.cols)
      throw std::invalid_argument("mixing: explicit matrix shape does not match rows/cols");
    if (!e->matrix.allFinite()) throw std::invalid_argument("mixing: explicit matrix has non-finite entries");
  }
  if (const auto* sigma = spectrum_of(spec)) {
    if (sigma->empty()) throw std::invalid_argument("mixing: empty spectrum");
    if (static_cast<Index>(sigma->size()) > std::min(spec.rows, spec.cols))
      throw std::invalid_argument("mixing: spectrum longer than min(rows, cols)");
    bool positive = false;
    for (std::size_t i = 0; i < sigma->size(); ++i) {
      const double s = (*sigma)[i];
      if (!std::isfinite(s) || s < 0.0) throw std::invalid_argument("mixing: spectrum entries must be finite and >= 0");
      if (i > 0 && s > (*sigma)[i - 1]) throw std::invalid_argument("mixing: spectrum must be sorted descending");
      positive = positive || s > 0.0;
    }
    if (!positive) throw std::invalid_argument("mixing: spectrum needs at least one positive entry");
  }
}

MatrixXd build_mixing(const MixingSpec& spec) {
  validate(spec);
  return std::visit(
      [&](const auto& kind) -> MatrixXd {
        using K = std::decay_t<decltype(kind)>;
        if constexpr (std::is_same_v<K, IdentityMixing>) {
          return MatrixXd::Identity(spec.rows, spec.cols);
        } else if constexpr (std::is_same_v<K, DiagonalSpectrum>) {
          return padded_diagonal(kind.sigma, spec.rows, spec.cols);
        } else if constexpr (std::is_same_v<K, RotatedSpectrum>) {
          Rng rng(derive_seed(kind.seed, 0));
          const MatrixXd u = haar_orthogonal(rng, spec.rows);
          const MatrixXd v = haar_orthogonal(rng, spec.cols);
          return u * padded_diagonal(kind.sigma, spec.rows, spec.cols) * v.transpose();
        } else {
          return kind.matrix;
        }
      },
      spec.kind);
}

std::string describe(const MixingSpec& spec) {
  std::ostringstream os;
  auto list = [&](const std::vector<double>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ";" : "") << v[i];
  };
  os << spec.rows << "x" << spec.cols << " ";
  if (std::holds_alternative<IdentityMixing>(spec.kind)) {
    os << "identity";
  } else if (const auto* d = std::get_if<DiagonalSpectrum>(&spec.kind)) {
    os << "diagonal(";
    list(d->sigma);
    os << ")";
  } else if (const auto* r = std::get_if<RotatedSpectrum>(&spec.kind)) {
    os << "rotated(";
    list(r->sigma);
    os << ";seed=" << r->seed << ")";
  } else {
    os << "explicit";
  }
  return os.str();
}

double RowDistribution::nominal_k() const {
  switch (kind) {
    case RowKind::Gaussian: return kGaussianK;
    case RowKind::Rademacher: return kRademacherK;
    case RowKind::Uniform: return kUniformK;
    case RowKind::Sphere: return kSphereK;
  }
  return kGaussianK;
}

std::string to_string(RowKind kind) {
  switch (kind) {
    case RowKind::Gaussian: return "gaussian";
    case RowKind::Rademacher: return "rademacher";
    case RowKind::Uniform: return "uniform";
    case RowKind::Sphere: return "sphere";
  }
  return "gaussian";
}

RowKind parse_row_kind(const std::string& name) {
  if (name == "gaussian") return RowKind::Gaussian;
  if (name == "rademacher") return RowKind::Rademacher;
  if (name == "uniform") return RowKind::Uniform;
  if (name == "sphere") return RowKind::Sphere;
  throw std::invalid_argument("unknown row distribution '" + name + "'");
}

void sample_row(RowKind kind, Rng& rng, Eigen::Ref<VectorXd> row) {
  const Index n = row.size();
  switch (kind) {
    case RowKind::Gaussian: {
      std::normal_distribution<double> normal(0.0, 1.0);
      for (Index j = 0; j < n; ++j) row[j] = normal(rng);
      break;
    }
    case RowKind::Rademacher: {
      std::bernoulli_distribution coin(0.5);
      for (Index j = 0; j < n; ++j) row[j] = coin(rng) ? 1.0 : -1.0;
      break;
    }
    case RowKind::Uniform: {
      const double a = std::sqrt(3.0);
      std::uniform_real_distribution<double> uniform(-a, a);
      for (Index j = 0; j < n; ++j) row[j] = uniform(rng);
      break;
    }
    case RowKind::Sphere: {
      row = random_unit_vector(rng, n) * std::sqrt(static_cast<double>(n));
      break;
    }
  }
}

MatrixXd sample_A(const RowDistribution& dist, Index m, Index n, Seed seed) {
  if (m < 1 || n < 1) throw std::invalid_argument("sample_A: dimensions must be positive");
  Rng rng(seed);
  MatrixXd a(m, n);
  VectorXd row(n);
  for (Index i = 0; i < m; ++i) {
    sample_row(dist.kind, rng, row);
    a.row(i) = row.transpose();
  }
  return a;
}

double estimate_subgaussian_k(const RowSampler& sampler, Index n, Index num_samples, Seed seed) {
  if (num_samples < 10000) throw std::invalid_argument("estimate_subgaussian_k: need at least 1e4 samples");
  if (n < 1) throw std::invalid_argument("estimate_subgaussian_k: n must be positive");
  constexpr int kDirections = 100;
  constexpr int kMaxMoment = 16;

  Rng rng(derive_seed(seed, 0));
  MatrixXd directions(n, kDirections);
  for (int d = 0; d < kDirections; ++d) directions.col(d) = random_unit_vector(rng, n);

  Rng sample_rng(derive_seed(seed, 1));
  MatrixXd samples(num_samples, n);
  VectorXd row(n);
  for (Index i = 0; i < num_samples; ++i) {
    sampler(sample_rng, row);
    samples.row(i) = row.transpose();
  }
  const MatrixXd proj = (samples * directions).cwiseAbs();

  double best = 0.0;
  for (int d = 0; d < kDirections; ++d) {
    for (int p = 2; p <= kMaxMoment; p += 2) {
      const double moment = proj.col(d).array().pow(p).mean();
      best = std::max(best, std::pow(moment, 1.0 / p) / std::sqrt(static_cast<double>(p)));
    }
  }
  // Standard Gaussian: the statistic peaks at p = 2 with value 1/sqrt(2).
  return best * kGaussianK * std::sqrt(2.0);
}

double estimate_subgaussian_k(const RowDistribution& dist, Index n, Index num_samples, Seed seed) {
  const RowKind kind = dist.kind;
  return estimate_subgaussian_k([kind](Rng& rng, Eigen::Ref<VectorXd> row) { sample_row(kind, rng, row); }, n,
                                num_samples, seed);
}

}  // namespace mixcs
