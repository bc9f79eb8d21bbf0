#pragma once

#include "mixcs/core.hpp"

#include <functional>
#include <stdexcept>
#include <string>
#include <variant>

namespace mixcs {

// ---------------------------------------------------------------------------
// Mixing matrix B (l x m)
// ---------------------------------------------------------------------------

struct IdentityMixing {};

/// B = diag(sigma) padded with zeros.
struct DiagonalSpectrum {
  std::vector<double> sigma;
};

/// B = U diag(sigma) V^T with Haar-random U, V drawn from `seed`.
struct RotatedSpectrum {
  std::vector<double> sigma;
  Seed seed = 0;
};

struct ExplicitMixing {
  MatrixXd matrix;
};

struct MixingSpec {
  Index rows = 0;  // l
  Index cols = 0;  // m
  std::variant<IdentityMixing, DiagonalSpectrum, RotatedSpectrum, ExplicitMixing> kind;
};

MixingSpec identity_mixing(Index size);

/// Throws std::invalid_argument when the spec is inconsistent.
void validate(const MixingSpec& spec);

/// Realizes B. Pure: equal specs give bit-identical matrices.
MatrixXd build_mixing(const MixingSpec& spec);

std::string describe(const MixingSpec& spec);

/// sr(B) = sum_i sigma_i^2 / sigma_max^2 over the numerically nonzero
/// singular values. Always lies in [1, rank(B)].
template <typename Derived>
typename Derived::RealScalar stable_rank(const Eigen::MatrixBase<Derived>& b) {
  using Real = typename Derived::RealScalar;
  using M = Matrix<typename Derived::Scalar>;
  if (b.size() == 0) throw std::domain_error("stable_rank: empty matrix");
  Eigen::BDCSVD<M> svd(b.eval());
  const auto& sv = svd.singularValues();
  const Index rank = numerical_rank(sv);
  if (rank == 0) throw std::domain_error("stable_rank: zero matrix");
  const Real top = sv[0];
  Real sum = 0;
  for (Index i = 0; i < rank; ++i) {
    const Real ratio = sv[i] / top;
    sum += ratio * ratio;
  }
  return sum;
}

/// Numerical rank at relative threshold 1e-9.
template <typename Derived>
Index matrix_rank(const Eigen::MatrixBase<Derived>& b) {
  using M = Matrix<typename Derived::Scalar>;
  if (b.size() == 0) return 0;
  Eigen::BDCSVD<M> svd(b.eval());
  return numerical_rank(svd.singularValues());
}

// ---------------------------------------------------------------------------
// Row distributions for A (m x n)
// ---------------------------------------------------------------------------

enum class RowKind {
  Gaussian,    // iid N(0, 1) entries
  Rademacher,  // iid +-1 entries
  Uniform,     // iid U[-sqrt(3), sqrt(3)] entries
  Sphere,      // sqrt(n) times a uniform unit vector
};

struct RowDistribution {
  RowKind kind = RowKind::Gaussian;

  /// Sub-gaussian parameter K carried by the distribution.
  ///   Gaussian   sqrt(8/3)       (closed form, E exp(g^2/t^2) = 2)
  ///   Rademacher 1/sqrt(ln 2)    (closed form, exp(1/t^2) = 2)
  ///   Uniform, Sphere            moment estimator output, frozen
  double nominal_k() const;
};

std::string to_string(RowKind kind);
RowKind parse_row_kind(const std::string& name);

inline constexpr double kGaussianK = 1.6329931618554521;    // sqrt(8/3)
inline constexpr double kRademacherK = 1.2011224087864498;  // 1/sqrt(ln 2)
// Frozen outputs of estimate_subgaussian_k(kind, n = 8, 1e5 samples, seed 20240101).
inline constexpr double kUniformK = 1.6385779823908158;
inline constexpr double kSphereK = 1.6399431926222727;

/// Fills `row` (length n) with one draw.
void sample_row(RowKind kind, Rng& rng, Eigen::Ref<VectorXd> row);

/// m x n matrix with iid rows; drawn row by row from a single stream.
MatrixXd sample_A(const RowDistribution& dist, Index m, Index n, Seed seed);

using RowSampler = std::function<void(Rng&, Eigen::Ref<VectorXd>)>;

/// Moment-based estimate of ||a||_psi2:
///   c * max_theta max_{p=2,4,...,16} (E|<theta,a>|^p)^{1/p} / sqrt(p)
/// over 100 random unit directions, with c chosen so that a standard
/// Gaussian row maps to kGaussianK.
double estimate_subgaussian_k(const RowSampler& sampler, Index n, Index num_samples, Seed seed);
double estimate_subgaussian_k(const RowDistribution& dist, Index n, Index num_samples, Seed seed);

}  // namespace mixcs
