#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace blindbench {

using MoleculeId = std::size_t;

struct MoleculeRecord {
  MoleculeId id = 0;
  std::optional<std::string> name;
  std::string smiles;
  double label = 0.0;
  /// Label exactly as written in the source file; keeps recorded precision
  /// ("-1.50" has three significant digits, the double does not know that).
  std::string label_text;
  std::string unit;

  /// Name used in prompts: the recorded name, or the SMILES when absent.
  const std::string& display_name() const { return name ? *name : smiles; }
};

struct Dataset {
  std::string name;
  std::vector<MoleculeRecord> records;
  std::string unit;
  double label_min = 0.0;
  double label_max = 0.0;

  std::vector<double> labels() const;
  std::vector<std::string> smiles() const;
};

/// Where each field lives in a dataset's CSV.
struct ColumnMapping {
  std::string smiles_column;
  std::string label_column;
  std::optional<std::string> name_column;
  std::string unit;
  /// Canonical file name, used when no explicit path is configured.
  std::string default_file;
};

/// Mappings for the three canonical MoleculeNet files (delaney-processed.csv,
/// Lipophilicity.csv, the SMILES variant of qm7.csv). Throws ConfigError for
/// unknown names.
ColumnMapping default_mapping(const std::string& dataset_name);
const std::vector<std::string>& canonical_dataset_names();

/// Expected record counts of the canonical files.
std::optional<std::size_t> canonical_size(const std::string& dataset_name);

Dataset load_dataset(const std::filesystem::path& path, const std::string& name,
                     const ColumnMapping& mapping);
Dataset load_dataset(std::istream& in, const std::string& name,
                     const ColumnMapping& mapping);

struct Split {
  std::vector<MoleculeId> train_ids;
  std::vector<MoleculeId> test_ids;
  std::uint64_t seed = 0;
  std::size_t test_size = 0;

  bool operator==(const Split&) const = default;
};

/// Seeded shuffle of all ids; the first `test_size` become the test set.
Split make_split(const Dataset& d, std::uint64_t seed, std::size_t test_size);

/// `k` train ids without replacement, in sampled order. The shot stream is
/// derived from `seed` with its own purpose tag, so it never aliases the
/// split stream.
std::vector<MoleculeId> sample_shots(const Split& split, std::size_t k,
                                     std::uint64_t seed);

nlohmann::json to_json(const Dataset& d);

}  // namespace blindbench
