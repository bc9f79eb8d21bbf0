#pragma once

#include "mixcs/core.hpp"

#include <string>
#include <vector>

namespace mixcs {

/// G(z) = act(W_d act(... act(W_1 z))), W_i of shape p_i x p_{i-1},
/// act(t) = max(t, 0) + leak * min(t, 0). leak = 0 is plain ReLU.
struct GnnModel {
  std::vector<MatrixXd> weights;
  double leak = 0.0;

  Index depth() const { return static_cast<Index>(weights.size()); }
  Index latent_dim() const { return weights.empty() ? 0 : weights.front().cols(); }
  Index output_dim() const { return weights.empty() ? 0 : weights.back().rows(); }
  /// p_0 = k, p_1, ..., p_d = n.
  std::vector<Index> dims() const;
};

/// Throws std::invalid_argument on an inconsistent shape chain.
void validate(const GnnModel& model);

/// Gaussian weights with entries N(0, 1/p_{i-1}).
GnnModel random_gnn(const std::vector<Index>& dims, Seed seed, double leak = 0.0);

VectorXd gnn_forward(const GnnModel& model, const Eigen::Ref<const VectorXd>& z);

/// Per-layer activation bits. A unit with pre-activation <= 0 is inactive.
using ActivationPattern = std::vector<std::vector<bool>>;

std::string pattern_string(const ActivationPattern& pattern);

/// Forward pass that also returns the local linear map: on the activation
/// region of z the network is exactly output = jacobian * z.
struct ForwardTrace {
  VectorXd output;
  MatrixXd jacobian;  // n x k
  ActivationPattern pattern;
};

ForwardTrace gnn_trace(const GnnModel& model, const Eigen::Ref<const VectorXd>& z);

/// Structured-text (JSON) model document: {"leak", "dims", "weights"}
/// with each weight matrix stored as a row-major flat array.
std::string to_json(const GnnModel& model);
GnnModel gnn_from_json(const std::string& text);
GnnModel load_gnn(const std::string& path);
void save_gnn(const GnnModel& model, const std::string& path);

// ---------------------------------------------------------------------------
// Latent-space least squares: min_z || M G(z) - y ||^2  (M = I if omitted)
// ---------------------------------------------------------------------------

struct LatentFitOptions {
  int restarts = 10;
  /// Extra restarts whose best objective audits the primary pool.
  int audit_restarts = 10;
  int max_iterations = 500;
  double rel_tol = 1e-9;
  Seed seed = 0;
  int threads = 1;
};

struct LatentFitResult {
  VectorXd z;
  VectorXd output;           // G(z)
  double objective = 0.0;    // best over the primary restarts
  double audit_best = 0.0;   // best over primary and audit restarts
  int iterations = 0;        // summed over all restarts
  bool converged = false;    // the winning restart met the tolerance
};

LatentFitResult fit_latent(const GnnModel& model, const Eigen::Ref<const VectorXd>& target,
                           const LatentFitOptions& opts);
LatentFitResult fit_latent(const GnnModel& model, const Eigen::Ref<const MatrixXd>& measurement,
                           const Eigen::Ref<const VectorXd>& y, const LatentFitOptions& opts);

}  // namespace mixcs
