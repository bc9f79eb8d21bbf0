#pragma once

#include "mixcs/config.hpp"
#include "mixcs/csv.hpp"
#include "mixcs/ensembles.hpp"
#include "mixcs/solvers.hpp"
#include "mixcs/structures.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mixcs {

/// Recognized sweep axes:
///   identity_size  B = I_v (l = m = v)
///   sr_ratio       B = I_m with m = ceil(v * K^2 log K * w^2)
///   noise_norm, mismatch, eps_target, injected_eps, sparsity
struct SweepAxis {
  std::string name;
  std::vector<double> values;
};

struct ExperimentConfig {
  MixingSpec mixing;
  RowDistribution rows;
  StructureSpec structure;
  double noise_norm = 0.0;
  double mismatch = 0.0;
  double eps_target = std::numeric_limits<double>::infinity();
  /// Forces a solver margin: the solution is moved along its face until
  /// the objective exceeds the optimum by exactly eps^2.
  std::optional<double> injected_eps;
  int trials = 1;
  Seed master_seed = 0;
  std::vector<SweepAxis> axes;
  Index width_gaussians = 2000;
  SolveOptions solver;
};

/// Throws ConfigError on violated invariants or unknown axes.
void validate(const ExperimentConfig& config);

/// Reads [mixing], [rows], [structure], [noise], [sweep] and optional [solver].
ExperimentConfig parse_experiment(const IniDocument& doc);

struct AxisPoint {
  std::vector<std::pair<std::string, double>> values;
  /// "name=value;name=value", or "base" for the empty point.
  std::string label() const;
};

/// Cartesian product of the axes, first axis outermost. A config without
/// axes yields one empty point.
std::vector<AxisPoint> axis_points(const ExperimentConfig& config);

/// Everything a trial needs that does not depend on the trial index.
struct TrialContext {
  ExperimentConfig config;
  std::string axis_label = "base";
  StructureSet structure;
  MatrixXd mixing;
  double stable_rank = 0.0;
  double frobenius = 0.0;
  double width = 0.0;
  std::string width_source;  // "mc" or "bound"
};

TrialContext prepare_trial_context(const ExperimentConfig& config, const AxisPoint& point = {});

enum class DrawStream { Truth, Noise, Sensing };

struct TrialResult {
  std::string axis_point;
  int trial = 0;
  Seed seed = 0;
  double sr_b = 0.0;
  double width = 0.0;
  std::string width_source;
  double noise_norm = 0.0;
  double eps_achieved = 0.0;
  bool eps_certified = false;
  double mismatch = 0.0;  // achieved dist(x, T)
  double recovery_error = 0.0;
  double term_noise = 0.0;
  double term_eps = 0.0;
  double term_mismatch = 0.0;
  bool converged = false;
  double wall_ms = 0.0;
  /// Order in which the random streams were consumed.
  std::vector<DrawStream> draw_order;
};

/// One recovery experiment. Deterministic given (context, trial_index).
/// The noise vector is drawn before the sensing matrix.
TrialResult run_trial(const TrialContext& context, int trial_index);
TrialResult run_trial(const ExperimentConfig& config, int trial_index);

const std::string& csv_header();
std::string csv_row(const TrialResult& result, bool with_timing);

/// All rows in key order (axis point, then trial).
std::vector<TrialResult> sweep(const ExperimentConfig& config, int threads = 1);

struct SweepFileOptions {
  int threads = 1;
  bool resume = false;
  bool record_timing = false;
  std::vector<std::string> comment_lines;
};

/// Rows are appended in key order to `path + ".partial"`, which is renamed
/// to `path` once every row is present. A leftover partial file is an
/// error unless `resume` is set, in which case its complete rows are kept.
/// Returns the number of rows written.
std::size_t sweep_to_file(const ExperimentConfig& config, const std::string& path, const SweepFileOptions& opts);

/// Partial output from an interrupted sweep blocks a fresh run.
class PartialOutputError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

struct ConcentrationSummary {
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  double within_10 = 0.0;  // fraction of ratios in [0.9, 1.1]
  double within_30 = 0.0;  // fraction of ratios in [0.7, 1.3]
  std::size_t count = 0;

  double iqr() const { return q3 - q1; }
};

/// Distribution of ||B A h|| / ||B||_F over fresh draws of A, for the unit
/// columns h of `directions`.
ConcentrationSummary verify_concentration(const MatrixXd& b, const RowDistribution& rows,
                                          const MatrixXd& directions, int trials, Seed seed, int threads = 1);
/// Directions drawn from (T - T) ∩ S via normalized differences of points.
ConcentrationSummary verify_concentration(const MatrixXd& b, const RowDistribution& rows, const StructureSet& set,
                                          int num_directions, int trials, Seed seed, int threads = 1);

struct SlopeFit {
  double slope = 0.0;
  double std_error = 0.0;
  std::size_t points = 0;
};

/// Least squares on (log x, log median y), one point per distinct x.
SlopeFit fit_log_log(std::span<const double> x, std::span<const double> y);
SlopeFit fit_slope(const CsvTable& table, const std::string& x_column, const std::string& y_column);

}  // namespace mixcs
