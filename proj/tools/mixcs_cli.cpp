#include "mixcs/config.hpp"
#include "mixcs/csv.hpp"
#include "mixcs/geometry.hpp"
#include "mixcs/harness.hpp"
#include "mixcs/solvers.hpp"
#include "mixcs/structures.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <sstream>

using namespace mixcs;

namespace {

struct Invocation {
  std::string subcommand;
  std::string config_path;
  std::string out_path;
  std::optional<Seed> seed;
  int threads = 1;
  bool resume = false;
  bool timing = false;
  int verbosity = 0;
};

void log(const Invocation& inv, const std::string& message) {
  if (inv.verbosity > 0) std::cerr << "[mixcs] " << message << '\n';
}

// Section holding the master seed of each subcommand.
std::string seed_section(const std::string& subcommand) {
  if (subcommand == "width") return "width";
  if (subcommand == "solve") return "solver";
  if (subcommand == "sweep") return "sweep";
  if (subcommand == "orthants") return "orthants";
  if (subcommand == "concentration") return "concentration";
  return "";
}

std::string header(const Invocation& inv, const IniDocument& doc, Seed seed) {
  std::string out = "# subcommand = " + inv.subcommand + "\n# seed = " + std::to_string(seed) + "\n";
  for (const auto& line : doc.comment_lines()) out += line + "\n";
  return out;
}

std::vector<std::string> header_lines(const Invocation& inv, const IniDocument& doc, Seed seed) {
  std::vector<std::string> lines = {"# subcommand = " + inv.subcommand, "# seed = " + std::to_string(seed)};
  for (const auto& line : doc.comment_lines()) lines.push_back(line);
  return lines;
}

// Applies --seed and returns the effective seed recorded in the header.
Seed resolve_seed(const Invocation& inv, IniDocument& doc) {
  const std::string section = seed_section(inv.subcommand);
  if (section.empty()) return inv.seed.value_or(0);
  if (inv.seed) doc.set(section, "seed", std::to_string(*inv.seed));
  if (!doc.has(section, "seed")) doc.set(section, "seed", "0");
  return doc.get_u64(section, "seed");
}

int run_width(const Invocation& inv, IniDocument& doc) {
  const Seed seed = resolve_seed(inv, doc);
  const StructureSet set = realize(parse_structure(doc));
  const WidthTarget target = parse_width_target(doc.get("width", "target"));
  const long long gaussians = doc.get_int("width", "gaussians");
  WidthOptions wopts;
  wopts.restarts = static_cast<int>(doc.get_int_or("width", "restarts", wopts.restarts));
  wopts.threads = inv.threads;
  const WidthEstimate w = width_mc(set, target, static_cast<Index>(gaussians), seed, wopts);
  std::string out = header(inv, doc, seed);
  out += "set,which,mean,stderr,num_gaussians,sup_solver\n";
  out += describe(set) + "," + to_string(target) + "," + format_double(w.mean) + "," + format_double(w.std_error) +
         "," + std::to_string(w.num_gaussians) + "," + to_string(w.sup_solver) + "\n";
  write_file_atomic(inv.out_path, out);
  return 0;
}

int run_solve(const Invocation& inv, IniDocument& doc) {
  const Seed seed = resolve_seed(inv, doc);
  const StructureSet set = realize(parse_structure(doc));
  const VectorXd y = read_vector_csv(doc.path("problem", "y"));
  MatrixXd m;
  if (doc.has("problem", "matrix")) {
    m = read_matrix_csv(doc.path("problem", "matrix"));
  } else {
    const MatrixXd b = read_matrix_csv(doc.path("problem", "mixing"));
    const MatrixXd a = read_matrix_csv(doc.path("problem", "sensing"));
    if (b.cols() != a.rows()) throw std::invalid_argument("solve: mixing columns must match sensing rows");
    m = b * a;
  }
  SolveOptions opts;
  opts.seed = seed;
  opts.threads = inv.threads;
  opts.max_iterations = static_cast<int>(doc.get_int_or("solver", "max_iterations", opts.max_iterations));
  opts.restarts = static_cast<int>(doc.get_int_or("solver", "restarts", opts.restarts));
  opts.audit_restarts = static_cast<int>(doc.get_int_or("solver", "audit_restarts", opts.audit_restarts));
  const double eps_target = doc.get_double_or("solver", "eps_target", std::numeric_limits<double>::infinity());
  const SolveReport rep = solve_with_gap_target(y, m, set, eps_target, opts);

  std::string out = header(inv, doc, seed);
  out += "strategy,objective,eps_upper,eps_certified,iterations,converged\n";
  out += to_string(rep.strategy) + "," + format_double(rep.objective) + "," + format_double(rep.eps()) + "," +
         (rep.gap_certified ? "1" : "0") + "," + std::to_string(rep.iterations) + "," + (rep.converged ? "1" : "0") +
         "\n";
  write_file_atomic(inv.out_path + ".xhat.csv", header(inv, doc, seed) + matrix_to_csv(rep.xhat));
  write_file_atomic(inv.out_path, out);
  return 0;
}

int run_sweep(const Invocation& inv, IniDocument& doc) {
  const Seed seed = resolve_seed(inv, doc);
  const ExperimentConfig config = parse_experiment(doc);
  SweepFileOptions opts;
  opts.threads = inv.threads;
  opts.resume = inv.resume;
  opts.record_timing = inv.timing;
  opts.comment_lines = header_lines(inv, doc, seed);
  const std::size_t rows = sweep_to_file(config, inv.out_path, opts);
  log(inv, "wrote " + std::to_string(rows) + " rows");
  return 0;
}

int run_regions(const Invocation& inv, IniDocument& doc) {
  const Seed seed = resolve_seed(inv, doc);
  const StructureSet set = realize(parse_structure(doc));
  const auto* gnn = std::get_if<GnnRange>(&set.variant);
  if (!gnn) throw ConfigError("regions: [structure] kind must be gnn");
  const auto regions = enumerate_regions(gnn->model);
  std::string out = header(inv, doc, seed);
  out += "pattern,dim\n";
  for (const auto& r : regions) out += pattern_string(r.pattern) + "," + std::to_string(r.basis.cols()) + "\n";
  write_file_atomic(inv.out_path, out);
  log(inv, std::to_string(regions.size()) + " regions");
  return 0;
}

int run_orthants(const Invocation& inv, IniDocument& doc) {
  const Seed seed = resolve_seed(inv, doc);
  const long long n = doc.get_int("orthants", "ambient");
  const long long k = doc.get_int("orthants", "dim");
  const long long count = doc.get_int_or("orthants", "count", 1);
  if (n < 1 || k < 1 || k > n || count < 1) throw ConfigError("[orthants] needs 1 <= dim <= ambient and count >= 1");
  const std::string mode_name = doc.find("orthants", "mode").value_or("exhaustive");
  OrthantMode mode;
  if (mode_name == "exhaustive") {
    mode = OrthantMode::Exhaustive;
  } else if (mode_name == "sampled") {
    mode = OrthantMode::Sampled;
  } else {
    throw ConfigError("[orthants] mode: unknown '" + mode_name + "' (exhaustive|sampled)");
  }
  const Index samples = static_cast<Index>(doc.get_int_or("orthants", "samples", 0));
  const double bound = std::ldexp(std::tgamma(n + 1.0) / (std::tgamma(k + 1.0) * std::tgamma(n - k + 1.0)),
                                  static_cast<int>(k));
  std::vector<std::int64_t> counts(static_cast<std::size_t>(count));
  parallel_for(counts.size(), inv.threads, [&](std::size_t i) {
    Rng rng(derive_seed(seed, i));
    const MatrixXd basis = random_orthonormal_basis(rng, n, k);
    counts[i] = count_orthants(basis, mode, samples, derive_seed(seed, i + 0x10000));
  });
  std::string out = header(inv, doc, seed);
  out += "subspace,ambient,dim,orthants,bound\n";
  for (std::size_t i = 0; i < counts.size(); ++i)
    out += std::to_string(i) + "," + std::to_string(n) + "," + std::to_string(k) + "," + std::to_string(counts[i]) +
           "," + format_double(std::round(bound)) + "\n";
  write_file_atomic(inv.out_path, out);
  return 0;
}

int run_concentration(const Invocation& inv, IniDocument& doc) {
  const Seed seed = resolve_seed(inv, doc);
  const MatrixXd b = build_mixing(parse_mixing(doc));
  const RowDistribution rows = parse_rows(doc);
  const int trials = static_cast<int>(doc.get_int("concentration", "trials"));
  const int directions = static_cast<int>(doc.get_int_or("concentration", "directions", 1));
  ConcentrationSummary s;
  if (doc.has_section("structure")) {
    s = verify_concentration(b, rows, realize(parse_structure(doc)), directions, trials, seed, inv.threads);
  } else {
    const Index n = static_cast<Index>(doc.get_int("concentration", "ambient"));
    if (n < 1 || directions < 1) throw ConfigError("[concentration] ambient and directions must be >= 1");
    Rng rng(derive_seed(seed, 0xD1EC7ULL));
    MatrixXd dirs(n, directions);
    for (int j = 0; j < directions; ++j) dirs.col(j) = random_unit_vector(rng, n);
    s = verify_concentration(b, rows, dirs, trials, derive_seed(seed, 0xA11CEULL), inv.threads);
  }
  std::string out = header(inv, doc, seed);
  out += "count,min,q1,median,q3,max,within_10,within_30\n";
  out += std::to_string(s.count) + "," + format_double(s.min) + "," + format_double(s.q1) + "," +
         format_double(s.median) + "," + format_double(s.q3) + "," + format_double(s.max) + "," +
         format_double(s.within_10) + "," + format_double(s.within_30) + "\n";
  write_file_atomic(inv.out_path, out);
  return 0;
}

int run_slope(const Invocation& inv, IniDocument& doc) {
  const Seed seed = resolve_seed(inv, doc);
  const CsvTable table = read_csv_table(doc.path("slope", "file"));
  const SlopeFit fit = fit_slope(table, doc.get("slope", "x"), doc.get("slope", "y"));
  std::string out = header(inv, doc, seed);
  out += "slope,stderr,points\n";
  out += format_double(fit.slope) + "," + format_double(fit.std_error) + "," + std::to_string(fit.points) + "\n";
  write_file_atomic(inv.out_path, out);
  return 0;
}

int dispatch(const Invocation& inv) {
  IniDocument doc = IniDocument::load(inv.config_path);
  if (inv.subcommand == "width") return run_width(inv, doc);
  if (inv.subcommand == "solve") return run_solve(inv, doc);
  if (inv.subcommand == "sweep") return run_sweep(inv, doc);
  if (inv.subcommand == "regions") return run_regions(inv, doc);
  if (inv.subcommand == "orthants") return run_orthants(inv, doc);
  if (inv.subcommand == "concentration") return run_concentration(inv, doc);
  if (inv.subcommand == "slope") return run_slope(inv, doc);
  throw ConfigError("unknown subcommand '" + inv.subcommand + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mixcs: structured recovery experiments with mixed sub-gaussian measurements"};
  app.require_subcommand(1, 1);
  Invocation inv;
  Seed seed_override = 0;

  for (const char* name : {"width", "solve", "sweep", "regions", "orthants", "concentration", "slope"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", inv.config_path, "Experiment config (INI)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", inv.out_path, "Output CSV path")->required();
    sub->add_option("--seed", seed_override, "Master seed override");
    sub->add_option("--threads", inv.threads, "Worker threads")->check(CLI::Range(1, 1024));
    sub->add_flag("--resume", inv.resume, "Continue an interrupted sweep");
    sub->add_flag("--timing", inv.timing, "Record wall_ms (breaks byte-identical output)");
    sub->add_flag("-v,--verbose", inv.verbosity, "Log progress to stderr");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  inv.subcommand = app.get_subcommands().front()->get_name();
  if (app.get_subcommands().front()->count("--seed") > 0) inv.seed = seed_override;

  try {
    return dispatch(inv);
  } catch (const ConfigError& e) {
    std::cerr << "mixcs: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "mixcs: " << e.what() << '\n';
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "mixcs: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "mixcs: " << e.what() << '\n';
    return 2;
  }
}
