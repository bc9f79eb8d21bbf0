#include "mixcs/config.hpp"

#include "mixcs/csv.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace mixcs {

double parse_double(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  if (t == "inf" || t == "+inf" || t == "infinity") return std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    throw ConfigError(what + ": expected a number, got '" + t + "'");
  }
  if (used != t.size()) throw ConfigError(what + ": expected a number, got '" + t + "'");
  return v;
}

std::vector<double> parse_doubles(const std::string& text, const std::string& what) {
  std::vector<double> out;
  for (const auto& cell : split(text, ',')) out.push_back(parse_double(cell, what));
  if (out.empty()) throw ConfigError(what + ": empty list");
  return out;
}

IniDocument IniDocument::parse(const std::string& text, std::string base_dir) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  IniDocument doc;
  doc.base_dir_ = std::move(base_dir);
  for (const auto& [name, section] : tree) {
    if (section.empty()) throw ConfigError("config: key '" + name + "' outside of a [section]");
    Entries entries;
    for (const auto& [key, value] : section) entries.emplace_back(key, trim(value.data()));
    doc.sections_.emplace_back(name, std::move(entries));
  }
  return doc;
}

IniDocument IniDocument::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const auto dir = std::filesystem::path(path).parent_path();
  return parse(ss.str(), dir.empty() ? std::string(".") : dir.string());
}

bool IniDocument::has_section(const std::string& section) const {
  for (const auto& s : sections_)
    if (s.first == section) return true;
  return false;
}

const IniDocument::Entries& IniDocument::entries(const std::string& section) const {
  for (const auto& s : sections_)
    if (s.first == section) return s.second;
  throw ConfigError("config: missing section [" + section + "]");
}

std::optional<std::string> IniDocument::find(const std::string& section, const std::string& key) const {
  for (const auto& s : sections_) {
    if (s.first != section) continue;
    for (const auto& [k, v] : s.second)
      if (k == key) return v;
  }
  return std::nullopt;
}

bool IniDocument::has(const std::string& section, const std::string& key) const {
  return find(section, key).has_value();
}

std::string IniDocument::get(const std::string& section, const std::string& key) const {
  if (!has_section(section)) throw ConfigError("config: missing section [" + section + "]");
  auto v = find(section, key);
  if (!v) throw ConfigError("config: missing key '" + key + "' in [" + section + "]");
  return *v;
}

double IniDocument::get_double(const std::string& section, const std::string& key) const {
  return parse_double(get(section, key), "[" + section + "] " + key);
}

long long IniDocument::get_int(const std::string& section, const std::string& key) const {
  const std::string text = get(section, key);
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(text, &used);
  } catch (const std::exception&) {
    throw ConfigError("[" + section + "] " + key + ": expected an integer, got '" + text + "'");
  }
  if (used != text.size()) throw ConfigError("[" + section + "] " + key + ": expected an integer, got '" + text + "'");
  return v;
}

std::uint64_t IniDocument::get_u64(const std::string& section, const std::string& key) const {
  const std::string text = get(section, key);
  std::size_t used = 0;
  std::uint64_t v = 0;
  try {
    if (!text.empty() && text[0] == '-') throw std::invalid_argument("negative");
    v = std::stoull(text, &used);
  } catch (const std::exception&) {
    throw ConfigError("[" + section + "] " + key + ": expected an unsigned integer, got '" + text + "'");
  }
  if (used != text.size())
    throw ConfigError("[" + section + "] " + key + ": expected an unsigned integer, got '" + text + "'");
  return v;
}

std::vector<double> IniDocument::get_doubles(const std::string& section, const std::string& key) const {
  return parse_doubles(get(section, key), "[" + section + "] " + key);
}

double IniDocument::get_double_or(const std::string& section, const std::string& key, double fallback) const {
  return has(section, key) ? get_double(section, key) : fallback;
}

long long IniDocument::get_int_or(const std::string& section, const std::string& key, long long fallback) const {
  return has(section, key) ? get_int(section, key) : fallback;
}

void IniDocument::set(const std::string& section, const std::string& key, const std::string& value) {
  for (auto& s : sections_) {
    if (s.first != section) continue;
    for (auto& [k, v] : s.second) {
      if (k == key) {
        v = value;
        return;
      }
    }
    s.second.emplace_back(key, value);
    return;
  }
  sections_.push_back({section, Entries{{key, value}}});
}

std::string IniDocument::path(const std::string& section, const std::string& key) const {
  const std::filesystem::path p(get(section, key));
  if (p.is_absolute()) return p.string();
  return (std::filesystem::path(base_dir_) / p).string();
}

std::vector<std::string> IniDocument::comment_lines() const {
  std::vector<std::string> out;
  for (const auto& [name, entries] : sections_) {
    out.push_back("# [" + name + "]");
    for (const auto& [k, v] : entries) out.push_back("# " + k + " = " + v);
  }
  return out;
}

namespace {

Index positive_index(const IniDocument& doc, const std::string& section, const std::string& key) {
  const long long v = doc.get_int(section, key);
  if (v < 1) throw ConfigError("[" + section + "] " + key + " must be >= 1");
  return static_cast<Index>(v);
}

}  // namespace

MixingSpec parse_mixing(const IniDocument& doc) {
  const std::string kind = doc.get("mixing", "kind");
  MixingSpec spec;
  spec.rows = positive_index(doc, "mixing", "rows");
  spec.cols = positive_index(doc, "mixing", "cols");
  if (kind == "identity") {
    spec.kind = IdentityMixing{};
  } else if (kind == "diagonal") {
    spec.kind = DiagonalSpectrum{doc.get_doubles("mixing", "spectrum")};
  } else if (kind == "rotated") {
    spec.kind = RotatedSpectrum{doc.get_doubles("mixing", "spectrum"), doc.get_u64("mixing", "seed")};
  } else if (kind == "explicit") {
    spec.kind = ExplicitMixing{read_matrix_csv(doc.path("mixing", "file"))};
  } else {
    throw ConfigError("[mixing] kind: unknown '" + kind + "' (identity|diagonal|rotated|explicit)");
  }
  return spec;
}

RowDistribution parse_rows(const IniDocument& doc) {
  try {
    return RowDistribution{parse_row_kind(doc.get("rows", "kind"))};
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("[rows] kind: ") + e.what());
  }
}

StructureSpec parse_structure(const IniDocument& doc) {
  StructureSpec spec;
  spec.kind = doc.get("structure", "kind");
  if (spec.kind == "sparse") {
    spec.ambient = positive_index(doc, "structure", "ambient");
    spec.sparsity = positive_index(doc, "structure", "sparsity");
  } else if (spec.kind == "subspace") {
    spec.ambient = positive_index(doc, "structure", "ambient");
    spec.dim = positive_index(doc, "structure", "dim");
    spec.seed = doc.get_u64("structure", "seed");
  } else if (spec.kind == "union") {
    spec.ambient = positive_index(doc, "structure", "ambient");
    spec.dim = positive_index(doc, "structure", "dim");
    spec.members = positive_index(doc, "structure", "members");
    spec.seed = doc.get_u64("structure", "seed");
  } else if (spec.kind == "gnn") {
    if (doc.has("structure", "model")) {
      spec.model_path = doc.path("structure", "model");
    } else {
      for (double p : doc.get_doubles("structure", "layers")) {
        if (p < 1 || p != std::floor(p)) throw ConfigError("[structure] layers must be positive integers");
        spec.layers.push_back(static_cast<Index>(p));
      }
      if (spec.layers.size() < 2) throw ConfigError("[structure] layers needs p0 and at least one layer");
      spec.seed = doc.get_u64("structure", "seed");
      spec.leak = doc.get_double_or("structure", "leak", 0.0);
    }
  } else {
    throw ConfigError("[structure] kind: unknown '" + spec.kind + "' (sparse|subspace|union|gnn)");
  }
  return spec;
}

StructureSet realize(const StructureSpec& spec) {
  if (spec.kind == "sparse") return make_sparse_cone(spec.ambient, spec.sparsity);
  if (spec.kind == "subspace") {
    if (spec.dim > spec.ambient) throw std::invalid_argument("structure: dim exceeds ambient dimension");
    Rng rng(spec.seed);
    return make_subspace(random_orthonormal_basis(rng, spec.ambient, spec.dim));
  }
  if (spec.kind == "union") {
    if (spec.dim > spec.ambient) throw std::invalid_argument("structure: dim exceeds ambient dimension");
    Rng rng(spec.seed);
    std::vector<MatrixXd> bases;
    for (Index i = 0; i < spec.members; ++i) bases.push_back(random_orthonormal_basis(rng, spec.ambient, spec.dim));
    return make_union(std::move(bases));
  }
  if (spec.kind == "gnn") {
    if (!spec.model_path.empty()) return make_gnn_range(load_gnn(spec.model_path));
    return make_gnn_range(random_gnn(spec.layers, spec.seed, spec.leak));
  }
  throw std::invalid_argument("structure: unknown kind '" + spec.kind + "'");
}

}  // namespace mixcs
