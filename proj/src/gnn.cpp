#include "mixcs/gnn.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mixcs {

std::vector<Index> GnnModel::dims() const {
  std::vector<Index> d;
  if (weights.empty()) return d;
  d.push_back(weights.front().cols());
  for (const auto& w : weights) d.push_back(w.rows());
  return d;
}

void validate(const GnnModel& model) {
  if (model.weights.empty()) throw std::invalid_argument("gnn: depth must be >= 1");
  if (model.latent_dim() < 1) throw std::invalid_argument("gnn: latent dimension must be >= 1");
  if (!std::isfinite(model.leak)) throw std::invalid_argument("gnn: leak must be finite");
  for (std::size_t i = 0; i < model.weights.size(); ++i) {
    const auto& w = model.weights[i];
    if (w.rows() < 1) throw std::invalid_argument("gnn: layer width must be >= 1");
    if (i > 0 && w.cols() != model.weights[i - 1].rows())
      throw std::invalid_argument("gnn: weight shapes do not chain at layer " + std::to_string(i + 1));
    if (!w.allFinite()) throw std::invalid_argument("gnn: non-finite weights");
  }
}

GnnModel random_gnn(const std::vector<Index>& dims, Seed seed, double leak) {
  if (dims.size() < 2) throw std::invalid_argument("random_gnn: need at least p0 and p1");
  GnnModel model;
  model.leak = leak;
  Rng rng(seed);
  for (std::size_t i = 1; i < dims.size(); ++i) {
    model.weights.push_back(gaussian_matrix(rng, dims[i], dims[i - 1]) /
                            std::sqrt(static_cast<double>(dims[i - 1])));
  }
  validate(model);
  return model;
}

VectorXd gnn_forward(const GnnModel& model, const Eigen::Ref<const VectorXd>& z) {
  if (z.size() != model.latent_dim()) throw std::invalid_argument("gnn_forward: latent dimension mismatch");
  VectorXd h = z;
  for (const auto& w : model.weights) {
    VectorXd pre = w * h;
    for (Index j = 0; j < pre.size(); ++j)
      if (!(pre[j] > 0.0)) pre[j] = model.leak == 0.0 ? 0.0 : pre[j] * model.leak;
    h = std::move(pre);
  }
  return h;
}

std::string pattern_string(const ActivationPattern& pattern) {
  std::string s;
  for (std::size_t l = 0; l < pattern.size(); ++l) {
    if (l) s += '|';
    for (bool b : pattern[l]) s += b ? '1' : '0';
  }
  return s;
}

ForwardTrace gnn_trace(const GnnModel& model, const Eigen::Ref<const VectorXd>& z) {
  if (z.size() != model.latent_dim()) throw std::invalid_argument("gnn_trace: latent dimension mismatch");
  ForwardTrace trace;
  VectorXd h = z;
  MatrixXd jac = MatrixXd::Identity(z.size(), z.size());
  for (const auto& w : model.weights) {
    VectorXd pre = w * h;
    MatrixXd pre_jac = w * jac;
    std::vector<bool> active(static_cast<std::size_t>(pre.size()));
    for (Index j = 0; j < pre.size(); ++j) {
      active[j] = pre[j] > 0.0;
      if (!active[j]) {
        pre[j] = model.leak == 0.0 ? 0.0 : pre[j] * model.leak;
        pre_jac.row(j) *= model.leak;
      }
    }
    trace.pattern.push_back(std::move(active));
    h = std::move(pre);
    jac = std::move(pre_jac);
  }
  trace.output = std::move(h);
  trace.jacobian = std::move(jac);
  return trace;
}

std::string to_json(const GnnModel& model) {
  nlohmann::json doc;
  doc["leak"] = model.leak;
  std::vector<long long> dims;
  for (Index d : model.dims()) dims.push_back(d);
  doc["dims"] = dims;
  doc["weights"] = nlohmann::json::array();
  for (const auto& w : model.weights) {
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(w.size()));
    for (Index i = 0; i < w.rows(); ++i)
      for (Index j = 0; j < w.cols(); ++j) flat.push_back(w(i, j));
    doc["weights"].push_back(flat);
  }
  return doc.dump(1);
}

GnnModel gnn_from_json(const std::string& text) {
  nlohmann::json doc;
  std::vector<long long> dims;
  try {
    doc = nlohmann::json::parse(text);
    dims = doc.at("dims").get<std::vector<long long>>();
    doc.at("weights");
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("gnn json: ") + e.what());
  }
  const auto& weights = doc.at("weights");
  if (dims.size() < 2 || weights.size() != dims.size() - 1)
    throw std::invalid_argument("gnn json: dims/weights length mismatch");
  GnnModel model;
  model.leak = doc.value("leak", 0.0);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    std::vector<double> flat;
    try {
      flat = weights[l].get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument(std::string("gnn json: ") + e.what());
    }
    const Index rows = dims[l + 1];
    const Index cols = dims[l];
    if (static_cast<Index>(flat.size()) != rows * cols)
      throw std::invalid_argument("gnn json: weight array " + std::to_string(l) + " has wrong length");
    MatrixXd w(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) w(i, j) = flat[static_cast<std::size_t>(i * cols + j)];
    model.weights.push_back(std::move(w));
  }
  validate(model);
  return model;
}

GnnModel load_gnn(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open gnn model '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return gnn_from_json(ss.str());
}

void save_gnn(const GnnModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write gnn model '" + path + "'");
  out << to_json(model) << '\n';
}

namespace {

struct RestartOutcome {
  VectorXd z;
  VectorXd output;
  double objective = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
};

// Descent on f(z) = ||M G(z) - y||^2. On the current activation region
// G(z) = J z, so the direction solves the region's linear least-squares
// problem; the step is halved until f decreases.
RestartOutcome descend(const GnnModel& model, const MatrixXd* m, const VectorXd& y, Seed seed,
                       const LatentFitOptions& opts) {
  const Index k = model.latent_dim();
  auto apply = [&](const VectorXd& v) -> VectorXd { return m ? VectorXd(*m * v) : v; };
  auto objective = [&](const VectorXd& z) { return (apply(gnn_forward(model, z)) - y).squaredNorm(); };

  Rng rng(seed);
  VectorXd z = gaussian_vector(rng, k);
  {
    // G is positively homogeneous: rescale the start to the best multiple.
    const VectorXd mg = apply(gnn_forward(model, z));
    const double denom = mg.squaredNorm();
    if (denom > 0.0) z *= std::max(0.0, mg.dot(y) / denom);
  }

  RestartOutcome out;
  double f = objective(z);
  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    const ForwardTrace trace = gnn_trace(model, z);
    const MatrixXd mj = m ? MatrixXd(*m * trace.jacobian) : trace.jacobian;
    const VectorXd residual = mj * z - y;
    VectorXd dir = -mj.completeOrthogonalDecomposition().solve(residual);
    if (!dir.allFinite() || dir.squaredNorm() == 0.0) dir = -mj.transpose() * residual;
    if (dir.squaredNorm() == 0.0) {
      out.converged = true;
      break;
    }
    double step = 1.0;
    double f_new = f;
    VectorXd z_new = z;
    while (step > 1e-12) {
      z_new = z + step * dir;
      f_new = objective(z_new);
      if (f_new < f) break;
      step *= 0.5;
    }
    if (!(f_new < f)) {
      out.converged = true;
      break;
    }
    const double decrease = f - f_new;
    z = std::move(z_new);
    f = f_new;
    if (decrease <= opts.rel_tol * std::max(f_new + decrease, 1e-300) || f == 0.0) {
      out.converged = true;
      ++it;
      break;
    }
  }
  out.z = z;
  out.output = gnn_forward(model, z);
  out.objective = f;
  out.iterations = it;
  return out;
}

LatentFitResult fit_latent_impl(const GnnModel& model, const MatrixXd* m, const VectorXd& y,
                                const LatentFitOptions& opts) {
  validate(model);
  if (opts.restarts < 1) throw std::invalid_argument("fit_latent: need at least one restart");
  if (opts.max_iterations < 1) throw std::invalid_argument("fit_latent: iteration budget must be positive");
  if (opts.audit_restarts < 0) throw std::invalid_argument("fit_latent: negative audit restarts");
  const Index rows = m ? m->rows() : model.output_dim();
  if (m && m->cols() != model.output_dim()) throw std::invalid_argument("fit_latent: measurement width mismatch");
  if (y.size() != rows) throw std::invalid_argument("fit_latent: target dimension mismatch");

  const std::size_t total = static_cast<std::size_t>(opts.restarts + opts.audit_restarts);
  std::vector<RestartOutcome> outcomes(total);
  parallel_for(total, opts.threads,
               [&](std::size_t r) { outcomes[r] = descend(model, m, y, derive_seed(opts.seed, r), opts); });

  std::size_t best = 0;
  for (std::size_t r = 1; r < static_cast<std::size_t>(opts.restarts); ++r)
    if (outcomes[r].objective < outcomes[best].objective) best = r;
  LatentFitResult result;
  result.z = outcomes[best].z;
  result.output = outcomes[best].output;
  result.objective = outcomes[best].objective;
  result.converged = outcomes[best].converged;
  result.audit_best = result.objective;
  for (const auto& o : outcomes) {
    result.audit_best = std::min(result.audit_best, o.objective);
    result.iterations += o.iterations;
  }
  return result;
}

}  // namespace

LatentFitResult fit_latent(const GnnModel& model, const Eigen::Ref<const VectorXd>& target,
                           const LatentFitOptions& opts) {
  return fit_latent_impl(model, nullptr, target, opts);
}

LatentFitResult fit_latent(const GnnModel& model, const Eigen::Ref<const MatrixXd>& measurement,
                           const Eigen::Ref<const VectorXd>& y, const LatentFitOptions& opts) {
  const MatrixXd m = measurement;
  return fit_latent_impl(model, &m, y, opts);
}

}  // namespace mixcs
