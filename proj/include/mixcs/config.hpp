#pragma once

#include "mixcs/ensembles.hpp"
#include "mixcs/structures.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mixcs {

/// Malformed or incomplete configuration (a usage error, not a numeric one).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// INI-style document: [section] headers with `key = value` lines. Order
/// of sections and keys is preserved so that a resolved document can be
/// echoed verbatim into result headers.
class IniDocument {
 public:
  using Entries = std::vector<std::pair<std::string, std::string>>;

  static IniDocument parse(const std::string& text, std::string base_dir = ".");
  static IniDocument load(const std::string& path);

  bool has_section(const std::string& section) const;
  bool has(const std::string& section, const std::string& key) const;
  const Entries& entries(const std::string& section) const;

  std::string get(const std::string& section, const std::string& key) const;
  std::optional<std::string> find(const std::string& section, const std::string& key) const;
  double get_double(const std::string& section, const std::string& key) const;
  long long get_int(const std::string& section, const std::string& key) const;
  std::uint64_t get_u64(const std::string& section, const std::string& key) const;
  std::vector<double> get_doubles(const std::string& section, const std::string& key) const;

  double get_double_or(const std::string& section, const std::string& key, double fallback) const;
  long long get_int_or(const std::string& section, const std::string& key, long long fallback) const;

  /// Inserts or overwrites; used to record resolved defaults and overrides.
  void set(const std::string& section, const std::string& key, const std::string& value);

  /// Resolves a path from the document relative to its directory.
  std::string path(const std::string& section, const std::string& key) const;

  /// "# [section]" / "# key = value" lines.
  std::vector<std::string> comment_lines() const;

 private:
  std::vector<std::pair<std::string, Entries>> sections_;
  std::string base_dir_ = ".";
};

double parse_double(const std::string& text, const std::string& what);
std::vector<double> parse_doubles(const std::string& text, const std::string& what);

MixingSpec parse_mixing(const IniDocument& doc);
RowDistribution parse_rows(const IniDocument& doc);

/// Recipe for a structure set; random bases and weights come from `seed`.
struct StructureSpec {
  std::string kind;  // sparse | subspace | union | gnn
  Index ambient = 0;
  Index sparsity = 0;
  Index dim = 0;
  Index members = 0;
  Seed seed = 0;
  std::vector<Index> layers;  // p_0 ... p_d
  double leak = 0.0;
  std::string model_path;
};

StructureSpec parse_structure(const IniDocument& doc);
StructureSet realize(const StructureSpec& spec);

}  // namespace mixcs
