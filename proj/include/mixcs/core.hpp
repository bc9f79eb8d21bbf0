#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <random>
#include <span>
#include <thread>
#include <vector>

namespace mixcs {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

using Seed = std::uint64_t;
using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Child seed for stream `index` of `master`. Used for per-trial and
/// per-draw seeds so that results never depend on scheduling.
constexpr Seed derive_seed(Seed master, std::uint64_t index) {
  return mix64(mix64(master) ^ (index * 0xD6E8FEB86659FD93ULL + 0x632BE59BD9B4E019ULL));
}

inline VectorXd gaussian_vector(Rng& rng, Index n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  VectorXd g(n);
  for (Index i = 0; i < n; ++i) g[i] = normal(rng);
  return g;
}

inline MatrixXd gaussian_matrix(Rng& rng, Index rows, Index cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixXd g(rows, cols);
  // row-major fill order
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) g(i, j) = normal(rng);
  return g;
}

/// Uniformly random unit vector.
inline VectorXd random_unit_vector(Rng& rng, Index n) {
  for (;;) {
    VectorXd g = gaussian_vector(rng, n);
    const double norm = g.norm();
    if (norm > 0.0) return g / norm;
  }
}

/// Haar-distributed orthogonal n x n matrix (QR of a Gaussian matrix,
/// columns sign-fixed so that R has a positive diagonal).
inline MatrixXd haar_orthogonal(Rng& rng, Index n) {
  const MatrixXd g = gaussian_matrix(rng, n, n);
  Eigen::HouseholderQR<MatrixXd> qr(g);
  MatrixXd q = qr.householderQ();
  const MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < n; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

/// Random n x k matrix with orthonormal columns spanning a Haar subspace.
inline MatrixXd random_orthonormal_basis(Rng& rng, Index n, Index k) {
  const MatrixXd g = gaussian_matrix(rng, n, k);
  Eigen::HouseholderQR<MatrixXd> qr(g);
  MatrixXd q = qr.householderQ() * MatrixXd::Identity(n, k);
  const MatrixXd r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  for (Index j = 0; j < k; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

/// Number of singular values above `rel_tol` times the largest one.
template <typename Derived>
Index numerical_rank(const Eigen::MatrixBase<Derived>& singular_values,
                     typename Derived::RealScalar rel_tol = 1e-9) {
  if (singular_values.size() == 0) return 0;
  const auto top = singular_values.maxCoeff();
  if (!(top > 0)) return 0;
  Index rank = 0;
  for (Index i = 0; i < singular_values.size(); ++i)
    if (singular_values[i] > rel_tol * top) ++rank;
  return rank;
}

/// Orthonormal basis for the column span of `a` (n x rank).
template <typename Derived>
Matrix<typename Derived::Scalar> column_span_basis(const Eigen::MatrixBase<Derived>& a,
                                                   typename Derived::RealScalar rel_tol = 1e-9) {
  using M = Matrix<typename Derived::Scalar>;
  if (a.cols() == 0) return M(a.rows(), 0);
  Eigen::JacobiSVD<M> svd(a, Eigen::ComputeThinU);
  const Index rank = numerical_rank(svd.singularValues(), rel_tol);
  return svd.matrixU().leftCols(rank);
}

/// Cascade (pairwise) summation; result does not depend on evaluation order
/// of the producers that filled `values`.
inline double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

struct MeanStderr {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Sample mean and standard error (sample std / sqrt(N)).
inline MeanStderr mean_and_stderr(std::span<const double> values) {
  MeanStderr out;
  const auto n = static_cast<double>(values.size());
  if (values.empty()) return out;
  out.mean = pairwise_sum(values) / n;
  if (values.size() < 2) return out;
  std::vector<double> sq(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) sq[i] = (values[i] - out.mean) * (values[i] - out.mean);
  const double var = pairwise_sum(sq) / (n - 1.0);
  out.std_error = std::sqrt(var / n);
  return out;
}

/// Median of a copy of `values`; average of the middle pair for even sizes.
inline double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

/// Linear-interpolated quantile, q in [0, 1].
inline double quantile(std::vector<double> values, double q) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

/// Runs fn(i) for i in [0, count) on up to `threads` workers. Callers write
/// results into slot i, so output is independent of the worker count. The
/// first exception thrown by any task is rethrown on the calling thread.
template <typename Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
  const std::size_t workers =
      std::min<std::size_t>(count, static_cast<std::size_t>(std::max(threads, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

bool all_finite(const Eigen::Ref<const MatrixXd>& m);

}  // namespace mixcs
