#include "mixcs/harness.hpp"

#include "mixcs/geometry.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace mixcs {

namespace {

constexpr std::uint64_t kStructureStream = 0x5354525543ULL;
constexpr std::uint64_t kWidthStream = 0x5749445448ULL;
constexpr std::uint64_t kTruthStream = 1;
constexpr std::uint64_t kNoiseStream = 2;
constexpr std::uint64_t kSensingStream = 3;
constexpr std::uint64_t kSolverStream = 4;
constexpr std::uint64_t kInjectStream = 5;

const std::vector<std::string>& known_axes() {
  static const std::vector<std::string> axes = {"identity_size", "sr_ratio",     "noise_norm", "mismatch",
                                                "eps_target",    "injected_eps", "sparsity"};
  return axes;
}

bool is_integer_axis(const std::string& name) { return name == "identity_size" || name == "sparsity"; }

}  // namespace

void validate(const ExperimentConfig& config) {
  if (!(config.noise_norm >= 0.0)) throw ConfigError("noise norm must be >= 0");
  if (!(config.mismatch >= 0.0)) throw ConfigError("mismatch must be >= 0");
  if (!(config.eps_target >= 0.0)) throw ConfigError("eps_target must be >= 0");
  if (config.injected_eps && !(*config.injected_eps >= 0.0)) throw ConfigError("injected_eps must be >= 0");
  if (config.trials < 1) throw ConfigError("trials must be >= 1");
  if (config.width_gaussians < 100) throw ConfigError("width_gaussians must be >= 100");
  for (const auto& axis : config.axes) {
    if (std::find(known_axes().begin(), known_axes().end(), axis.name) == known_axes().end())
      throw ConfigError("unknown sweep axis '" + axis.name + "'");
    if (axis.values.empty()) throw ConfigError("sweep axis '" + axis.name + "' has no values");
    for (double v : axis.values) {
      if (!(v >= 0.0)) throw ConfigError("sweep axis '" + axis.name + "' has a negative value");
      if (is_integer_axis(axis.name) && (v < 1 || v != std::floor(v)))
        throw ConfigError("sweep axis '" + axis.name + "' needs positive integers");
    }
  }
}

ExperimentConfig parse_experiment(const IniDocument& doc) {
  ExperimentConfig config;
  config.mixing = parse_mixing(doc);
  config.rows = parse_rows(doc);
  config.structure = parse_structure(doc);
  config.width_gaussians = doc.get_int_or("structure", "width_gaussians", 2000);
  config.noise_norm = doc.get_double("noise", "norm");
  config.mismatch = doc.get_double("noise", "mismatch");
  config.eps_target = doc.get_double("noise", "eps_target");
  if (doc.has("noise", "injected_eps")) config.injected_eps = doc.get_double("noise", "injected_eps");
  const long long trials = doc.get_int("sweep", "trials");
  if (trials < 1 || trials > 100000000) throw ConfigError("[sweep] trials out of range");
  config.trials = static_cast<int>(trials);
  config.master_seed = doc.get_u64("sweep", "seed");
  for (const auto& [key, value] : doc.entries("sweep")) {
    if (key == "trials" || key == "seed") continue;
    config.axes.push_back({key, parse_doubles(value, "[sweep] " + key)});
  }
  if (doc.has_section("solver")) {
    config.solver.max_iterations = static_cast<int>(doc.get_int_or("solver", "max_iterations", 500));
    config.solver.restarts = static_cast<int>(doc.get_int_or("solver", "restarts", 10));
    config.solver.audit_restarts = static_cast<int>(doc.get_int_or("solver", "audit_restarts", 10));
  }
  validate(config);
  return config;
}

std::string AxisPoint::label() const {
  if (values.empty()) return "base";
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ';';
    out += values[i].first + "=" + format_double(values[i].second);
  }
  return out;
}

std::vector<AxisPoint> axis_points(const ExperimentConfig& config) {
  std::vector<AxisPoint> points(1);
  for (const auto& axis : config.axes) {
    std::vector<AxisPoint> next;
    for (const auto& p : points) {
      for (double v : axis.values) {
        AxisPoint q = p;
        q.values.emplace_back(axis.name, v);
        next.push_back(std::move(q));
      }
    }
    points = std::move(next);
  }
  return points;
}

TrialContext prepare_trial_context(const ExperimentConfig& base, const AxisPoint& point) {
  TrialContext ctx;
  ctx.config = base;
  ctx.axis_label = point.label();
  ExperimentConfig& config = ctx.config;
  std::optional<double> sr_ratio;
  for (const auto& [name, v] : point.values) {
    if (name == "identity_size") {
      config.mixing = identity_mixing(static_cast<Index>(v));
    } else if (name == "sr_ratio") {
      sr_ratio = v;
    } else if (name == "noise_norm") {
      config.noise_norm = v;
    } else if (name == "mismatch") {
      config.mismatch = v;
    } else if (name == "eps_target") {
      config.eps_target = v;
    } else if (name == "injected_eps") {
      config.injected_eps = v;
    } else if (name == "sparsity") {
      config.structure.sparsity = static_cast<Index>(v);
    } else {
      throw ConfigError("unknown sweep axis '" + name + "'");
    }
  }
  config.structure.seed = config.structure.seed;  // structure seeds are part of the spec
  ctx.structure = realize(config.structure);

  if (ctx.structure.is_exact()) {
    const WidthEstimate w = width_mc(ctx.structure, WidthTarget::Difference, config.width_gaussians,
                                     derive_seed(config.master_seed, kWidthStream));
    ctx.width = w.mean;
    ctx.width_source = "mc";
  } else {
    const auto& model = std::get<GnnRange>(ctx.structure.variant).model;
    const auto dims = model.dims();
    ctx.width = gnn_width_bound(model.latent_dim(), std::vector<Index>(dims.begin() + 1, dims.end())).width_bound;
    ctx.width_source = "bound";
  }

  if (sr_ratio) {
    const double k = config.rows.nominal_k();
    const double factor = k * k * std::log(k);
    if (!(factor > 0.0)) throw std::domain_error("sr_ratio axis needs K > 1");
    const double m = std::ceil(*sr_ratio * factor * ctx.width * ctx.width);
    config.mixing = identity_mixing(std::max<Index>(1, static_cast<Index>(m)));
  }
  ctx.mixing = build_mixing(config.mixing);
  ctx.stable_rank = stable_rank(ctx.mixing);
  ctx.frobenius = ctx.mixing.norm();
  (void)kStructureStream;
  return ctx;
}

namespace {

// Ground truth x = x_T + c u with x_T a unit point of T and u a unit
// direction away from T; c is rescaled until dist(x, T) is within 10% of
// the requested mismatch.
VectorXd draw_truth(const TrialContext& ctx, Rng& rng, const ProjectOptions& popts, double& achieved) {
  const StructureSet& set = ctx.structure;
  const double target = ctx.config.mismatch;
  const VectorXd base = sample_point(set, rng, true);
  achieved = 0.0;
  if (target == 0.0) return base;

  VectorXd best = base;
  double best_err = std::numeric_limits<double>::infinity();
  constexpr int kAttempts = 50;
  constexpr int kRescales = 6;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    const VectorXd g = random_unit_vector(rng, set.ambient);
    VectorXd u = g - project(set, g, popts).point;
    if (!(u.norm() > 1e-12)) continue;
    u.normalize();
    double c = target;
    for (int r = 0; r < kRescales; ++r) {
      const VectorXd x = base + c * u;
      const double d = distance(set, x, popts);
      const double err = std::abs(d - target);
      if (err < best_err) {
        best_err = err;
        best = x;
        achieved = d;
      }
      if (err <= 0.1 * target) return x;
      if (!(d > 0.0)) break;
      c *= target / d;
    }
  }
  return best;
}

// Direction inside the face of T that contains xhat.
VectorXd face_direction(const StructureSet& set, const VectorXd& xhat, Rng& rng) {
  if (const auto* sub = std::get_if<Subspace>(&set.variant)) return sub->basis * gaussian_vector(rng, sub->basis.cols());
  if (const auto* uni = std::get_if<UnionOfSubspaces>(&set.variant)) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < uni->bases.size(); ++i) {
      const MatrixXd& b = uni->bases[i];
      const double d = (xhat - b * (b.transpose() * xhat)).norm();
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    const MatrixXd& b = uni->bases[best];
    return b * gaussian_vector(rng, b.cols());
  }
  if (const auto* sc = std::get_if<SparseCone>(&set.variant)) {
    std::vector<Index> support;
    for (Index i = 0; i < xhat.size(); ++i)
      if (xhat[i] != 0.0) support.push_back(i);
    if (support.empty()) {
      VectorXd h = sample_point(set, rng, false);
      (void)sc;
      return h;
    }
    VectorXd h = VectorXd::Zero(xhat.size());
    for (Index i : support) h[i] = gaussian_vector(rng, 1)[0];
    return h;
  }
  throw std::invalid_argument("injected_eps requires an exact structure (sparse, subspace or union)");
}

}  // namespace

TrialResult run_trial(const TrialContext& ctx, int trial_index) {
  const auto started = std::chrono::steady_clock::now();
  const ExperimentConfig& config = ctx.config;
  TrialResult out;
  out.axis_point = ctx.axis_label;
  out.trial = trial_index;
  out.seed = derive_seed(config.master_seed, static_cast<std::uint64_t>(trial_index));
  out.sr_b = ctx.stable_rank;
  out.width = ctx.width;
  out.width_source = ctx.width_source;
  out.noise_norm = config.noise_norm;

  const StructureSet& set = ctx.structure;
  const Index n = set.ambient;
  const Index l = ctx.mixing.rows();
  const Index m = ctx.mixing.cols();

  ProjectOptions popts;
  popts.seed = derive_seed(out.seed, kSolverStream + 100);

  Rng truth_rng(derive_seed(out.seed, kTruthStream));
  double achieved_mismatch = 0.0;
  const VectorXd x = draw_truth(ctx, truth_rng, popts, achieved_mismatch);
  out.draw_order.push_back(DrawStream::Truth);
  out.mismatch = achieved_mismatch;

  // The noise is fixed before the sensing matrix is drawn.
  Rng noise_rng(derive_seed(out.seed, kNoiseStream));
  const VectorXd w = config.noise_norm * random_unit_vector(noise_rng, l);
  out.draw_order.push_back(DrawStream::Noise);

  const MatrixXd a = sample_A(config.rows, m, n, derive_seed(out.seed, kSensingStream));
  out.draw_order.push_back(DrawStream::Sensing);

  const MatrixXd meas = ctx.mixing * a;
  const VectorXd y = meas * x + w;

  SolveOptions sopts = config.solver;
  sopts.seed = derive_seed(out.seed, kSolverStream);
  sopts.threads = 1;
  const SolveReport rep = solve_with_gap_target(y, meas, set, config.eps_target, sopts);
  VectorXd xhat = rep.xhat;
  double eps = rep.eps();

  if (config.injected_eps && *config.injected_eps > 0.0) {
    Rng inject_rng(derive_seed(out.seed, kInjectStream));
    VectorXd h = face_direction(set, xhat, inject_rng);
    for (int tries = 0; tries < 10 && !((meas * h).norm() > 0.0); ++tries) h = face_direction(set, xhat, inject_rng);
    const double mh = (meas * h).norm();
    if (!(mh > 0.0)) throw std::domain_error("injected_eps: face direction is in the null space of M");
    xhat += (*config.injected_eps / mh) * h;
    const double min_estimate = rep.objective - rep.gap_upper;
    eps = std::sqrt(std::max(0.0, (y - meas * xhat).squaredNorm() - min_estimate));
  }

  const double k = config.rows.nominal_k();
  const double root_sr = std::sqrt(ctx.stable_rank);
  out.eps_achieved = eps;
  out.eps_certified = rep.gap_certified;
  out.recovery_error = (x - xhat).norm();
  out.term_noise = k * ctx.width / (ctx.frobenius * root_sr) * w.norm();
  out.term_eps = eps / ctx.frobenius;
  out.term_mismatch = k * std::sqrt(static_cast<double>(l)) / root_sr * achieved_mismatch;
  out.converged = rep.converged;
  out.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
  return out;
}

TrialResult run_trial(const ExperimentConfig& config, int trial_index) {
  return run_trial(prepare_trial_context(config), trial_index);
}

const std::string& csv_header() {
  static const std::string header =
      "axis_point,trial,seed,sr_b,width,width_source,noise_norm,eps_achieved,eps_certified,mismatch,"
      "recovery_error,term_noise,term_eps,term_mismatch,converged,wall_ms";
  return header;
}

std::string csv_row(const TrialResult& r, bool with_timing) {
  std::ostringstream os;
  os << r.axis_point << ',' << r.trial << ',' << r.seed << ',' << format_double(r.sr_b) << ','
     << format_double(r.width) << ',' << r.width_source << ',' << format_double(r.noise_norm) << ','
     << format_double(r.eps_achieved) << ',' << (r.eps_certified ? 1 : 0) << ',' << format_double(r.mismatch) << ','
     << format_double(r.recovery_error) << ',' << format_double(r.term_noise) << ',' << format_double(r.term_eps)
     << ',' << format_double(r.term_mismatch) << ',' << (r.converged ? 1 : 0) << ','
     << (with_timing ? format_double(std::round(r.wall_ms * 1000.0) / 1000.0) : std::string("0"));
  return os.str();
}

namespace {

struct Task {
  std::size_t point = 0;
  int trial = 0;
};

std::vector<Task> all_tasks(std::size_t points, int trials) {
  std::vector<Task> tasks;
  tasks.reserve(points * static_cast<std::size_t>(trials));
  for (std::size_t p = 0; p < points; ++p)
    for (int t = 0; t < trials; ++t) tasks.push_back({p, t});
  return tasks;
}

std::vector<TrialContext> prepare_all(const ExperimentConfig& config, const std::vector<AxisPoint>& points,
                                      int threads) {
  std::vector<TrialContext> contexts(points.size());
  parallel_for(points.size(), threads, [&](std::size_t i) { contexts[i] = prepare_trial_context(config, points[i]); });
  return contexts;
}

}  // namespace

std::vector<TrialResult> sweep(const ExperimentConfig& config, int threads) {
  validate(config);
  const auto points = axis_points(config);
  const auto contexts = prepare_all(config, points, threads);
  const auto tasks = all_tasks(points.size(), config.trials);
  std::vector<TrialResult> results(tasks.size());
  parallel_for(tasks.size(), threads,
               [&](std::size_t i) { results[i] = run_trial(contexts[tasks[i].point], tasks[i].trial); });
  return results;
}

std::size_t sweep_to_file(const ExperimentConfig& config, const std::string& path, const SweepFileOptions& opts) {
  validate(config);
  const auto points = axis_points(config);
  const auto tasks = all_tasks(points.size(), config.trials);
  const std::string partial = path + ".partial";

  std::string preamble;
  for (const auto& line : opts.comment_lines) preamble += line + "\n";
  preamble += csv_header() + "\n";

  std::size_t done = 0;
  if (std::filesystem::exists(partial)) {
    if (!opts.resume)
      throw PartialOutputError("partial output '" + partial + "' exists; rerun with --resume or remove it");
    std::ifstream in(partial, std::ios::binary);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    // Drop a trailing line cut short by an interruption.
    const auto last_newline = content.rfind('\n');
    content.resize(last_newline == std::string::npos ? 0 : last_newline + 1);
    if (content.size() < preamble.size() || content.compare(0, preamble.size(), preamble) != 0)
      throw PartialOutputError("partial output '" + partial + "' was produced by a different configuration");
    std::istringstream body(content.substr(preamble.size()));
    std::string line;
    while (std::getline(body, line)) {
      if (done >= tasks.size()) throw PartialOutputError("partial output has more rows than the sweep");
      const auto cells = split(line, ',');
      const Task& t = tasks[done];
      if (cells.size() < 2 || cells[0] != points[t.point].label() || cells[1] != std::to_string(t.trial))
        throw PartialOutputError("partial output rows are out of key order");
      ++done;
    }
    std::ofstream rewrite(partial, std::ios::binary | std::ios::trunc);
    rewrite << content;
  } else {
    std::ofstream fresh(partial, std::ios::binary | std::ios::trunc);
    if (!fresh) throw std::runtime_error("cannot write '" + partial + "'");
    fresh << preamble;
  }

  std::vector<TrialContext> contexts(points.size());
  std::vector<bool> prepared(points.size(), false);
  std::ofstream out(partial, std::ios::binary | std::ios::app);
  if (!out) throw std::runtime_error("cannot append to '" + partial + "'");

  const std::size_t batch = static_cast<std::size_t>(std::max(opts.threads, 1)) * 4;
  std::size_t written = done;
  for (std::size_t start = done; start < tasks.size(); start += batch) {
    const std::size_t stop = std::min(tasks.size(), start + batch);
    std::vector<std::size_t> needed;
    for (std::size_t i = start; i < stop; ++i) {
      const std::size_t p = tasks[i].point;
      if (!prepared[p] && std::find(needed.begin(), needed.end(), p) == needed.end()) needed.push_back(p);
    }
    parallel_for(needed.size(), opts.threads,
                 [&](std::size_t j) { contexts[needed[j]] = prepare_trial_context(config, points[needed[j]]); });
    for (std::size_t p : needed) prepared[p] = true;

    std::vector<TrialResult> results(stop - start);
    parallel_for(results.size(), opts.threads, [&](std::size_t j) {
      const Task& t = tasks[start + j];
      results[j] = run_trial(contexts[t.point], t.trial);
    });
    for (const auto& r : results) out << csv_row(r, opts.record_timing) << '\n';
    out.flush();
    if (!out) throw std::runtime_error("write failed for '" + partial + "'");
    written += results.size();
  }
  out.close();
  if (written != tasks.size()) throw std::runtime_error("sweep produced fewer rows than promised");
  std::filesystem::rename(partial, path);
  return written;
}

ConcentrationSummary verify_concentration(const MatrixXd& b, const RowDistribution& rows, const MatrixXd& directions,
                                          int trials, Seed seed, int threads) {
  if (trials < 1) throw std::invalid_argument("verify_concentration: trials must be >= 1");
  if (directions.cols() < 1) throw std::invalid_argument("verify_concentration: no directions");
  const double fro = b.norm();
  if (!(fro > 0.0)) throw std::domain_error("verify_concentration: ||B||_F must be positive");
  const Index m = b.cols();
  const Index n = directions.rows();
  const auto per_trial = static_cast<std::size_t>(directions.cols());
  std::vector<double> ratios(static_cast<std::size_t>(trials) * per_trial);
  parallel_for(static_cast<std::size_t>(trials), threads, [&](std::size_t t) {
    const MatrixXd a = sample_A(rows, m, n, derive_seed(seed, t));
    const MatrixXd bah = b * (a * directions);
    for (std::size_t j = 0; j < per_trial; ++j) ratios[t * per_trial + j] = bah.col(static_cast<Index>(j)).norm() / fro;
  });
  ConcentrationSummary s;
  s.count = ratios.size();
  s.min = *std::min_element(ratios.begin(), ratios.end());
  s.max = *std::max_element(ratios.begin(), ratios.end());
  s.q1 = quantile(ratios, 0.25);
  s.median = quantile(ratios, 0.5);
  s.q3 = quantile(ratios, 0.75);
  std::size_t in10 = 0, in30 = 0;
  for (double r : ratios) {
    if (std::abs(r - 1.0) <= 0.1) ++in10;
    if (std::abs(r - 1.0) <= 0.3) ++in30;
  }
  s.within_10 = static_cast<double>(in10) / static_cast<double>(s.count);
  s.within_30 = static_cast<double>(in30) / static_cast<double>(s.count);
  return s;
}

ConcentrationSummary verify_concentration(const MatrixXd& b, const RowDistribution& rows, const StructureSet& set,
                                          int num_directions, int trials, Seed seed, int threads) {
  if (num_directions < 1) throw std::invalid_argument("verify_concentration: need at least one direction");
  Rng rng(derive_seed(seed, 0xD1EC7ULL));
  MatrixXd dirs(set.ambient, num_directions);
  for (int j = 0; j < num_directions; ++j) {
    VectorXd h;
    do {
      h = sample_point(set, rng, false) - sample_point(set, rng, false);
    } while (!(h.norm() > 0.0));
    dirs.col(j) = h.normalized();
  }
  return verify_concentration(b, rows, dirs, trials, derive_seed(seed, 0xA11CEULL), threads);
}

SlopeFit fit_log_log(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("fit_slope: column lengths differ");
  std::map<double, std::vector<double>> groups;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw std::domain_error("fit_slope: values must be positive");
    groups[x[i]].push_back(y[i]);
  }
  if (groups.size() < 4) throw std::invalid_argument("fit_slope: need at least 4 distinct x values");
  std::vector<double> lx, ly;
  for (const auto& [xv, ys] : groups) {
    lx.push_back(std::log(xv));
    ly.push_back(std::log(median(ys)));
  }
  const auto count = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= count;
  my /= count;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  SlopeFit fit;
  fit.points = lx.size();
  fit.slope = sxy / sxx;
  const double intercept = my - fit.slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    const double r = ly[i] - (intercept + fit.slope * lx[i]);
    ssr += r * r;
  }
  fit.std_error = std::sqrt(ssr / (count - 2.0) / sxx);
  return fit;
}

SlopeFit fit_slope(const CsvTable& table, const std::string& x_column, const std::string& y_column) {
  const auto x = table.numeric_column(x_column);
  const auto y = table.numeric_column(y_column);
  return fit_log_log(x, y);
}

}  // namespace mixcs
