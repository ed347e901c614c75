#include "blindbench/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "blindbench/csv.hpp"
#include "blindbench/error.hpp"
#include "blindbench/rng.hpp"
#include "blindbench/text.hpp"
#include "blindbench/transform.hpp"

namespace blindbench {

std::vector<double> Dataset::labels() const {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.label);
  return out;
}

std::vector<std::string> Dataset::smiles() const {
  std::vector<std::string> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.smiles);
  return out;
}

const std::vector<std::string>& canonical_dataset_names() {
  static const std::vector<std::string> names{"delaney", "lipophilicity",
                                              "qm7"};
  return names;
}

ColumnMapping default_mapping(const std::string& dataset_name) {
  if (dataset_name == "delaney") {
    return {"smiles", "measured log solubility in mols per litre",
            "Compound ID", "log(mol/L)", "delaney-processed.csv"};
  }
  if (dataset_name == "lipophilicity") {
    return {"smiles", "exp", std::nullopt, "logD", "Lipophilicity.csv"};
  }
  if (dataset_name == "qm7") {
    return {"smiles", "u0_atom", std::nullopt, "kcal/mol", "qm7.csv"};
  }
  throw ConfigError("no default column mapping for dataset '" + dataset_name +
                    "'");
}

std::optional<std::size_t> canonical_size(const std::string& dataset_name) {
  if (dataset_name == "delaney") return 1128;
  if (dataset_name == "lipophilicity") return 4200;
  if (dataset_name == "qm7") return 6834;
  return std::nullopt;
}

namespace {

std::size_t column_index(const csv::Row& header, const std::string& column) {
  const auto it = std::find_if(header.begin(), header.end(), [&](const auto& h) {
    return trim(h) == column;
  });
  if (it == header.end()) throw SchemaError(column);
  return static_cast<std::size_t>(it - header.begin());
}

}  // namespace

Dataset load_dataset(std::istream& in, const std::string& name,
                     const ColumnMapping& mapping) {
  const auto rows = csv::read(in);
  if (rows.empty()) throw EmptyDatasetError("dataset '" + name + "' is empty");
  const auto& header = rows.front();
  const auto smiles_col = column_index(header, mapping.smiles_column);
  const auto label_col = column_index(header, mapping.label_column);
  std::optional<std::size_t> name_col;
  if (mapping.name_column) name_col = column_index(header, *mapping.name_column);

  Dataset d;
  d.name = name;
  d.unit = mapping.unit;
  d.records.reserve(rows.size() - 1);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::size_t needed =
        std::max({smiles_col, label_col, name_col.value_or(0)}) + 1;
    if (row.size() < needed) {
      throw RowError(r, "expected at least " + std::to_string(needed) +
                            " columns, found " + std::to_string(row.size()));
    }
    MoleculeRecord rec;
    rec.id = d.records.size();
    rec.smiles = std::string(trim(row[smiles_col]));
    if (rec.smiles.empty()) throw RowError(r, "empty SMILES");
    try {
      tokenize_smiles(rec.smiles);
    } catch (const TokenizeError& e) {
      throw RowError(r, "SMILES '" + rec.smiles + "' rejected at " + e.what());
    }
    rec.label_text = std::string(trim(row[label_col]));
    const auto label = parse_double(rec.label_text);
    if (!label) {
      throw RowError(r, "non-numeric label '" + rec.label_text + "'");
    }
    rec.label = *label;
    if (name_col) {
      auto n = std::string(trim(row[*name_col]));
      if (!n.empty()) rec.name = std::move(n);
    }
    rec.unit = mapping.unit;
    d.records.push_back(std::move(rec));
  }
  if (d.records.empty()) {
    throw EmptyDatasetError("dataset '" + name + "' has no rows");
  }
  const auto [lo, hi] = std::minmax_element(
      d.records.begin(), d.records.end(),
      [](const auto& a, const auto& b) { return a.label < b.label; });
  d.label_min = lo->label;
  d.label_max = hi->label;
  return d;
}

Dataset load_dataset(const std::filesystem::path& path, const std::string& name,
                     const ColumnMapping& mapping) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open dataset file " + path.string());
  return load_dataset(in, name, mapping);
}

Split make_split(const Dataset& d, std::uint64_t seed, std::size_t test_size) {
  const std::size_t n = d.records.size();
  if (test_size == 0) throw SizeError("test_size must be positive");
  if (test_size >= n) {
    throw SizeError("test_size " + std::to_string(test_size) +
                    " must be smaller than the dataset size " +
                    std::to_string(n));
  }
  std::vector<MoleculeId> ids(n);
  std::iota(ids.begin(), ids.end(), MoleculeId{0});
  Prng rng(derive_seed(seed, {"split", d.name}));
  shuffle_prefix(ids, rng);
  Split s;
  s.seed = seed;
  s.test_size = test_size;
  s.test_ids.assign(ids.begin(), ids.begin() + static_cast<long>(test_size));
  s.train_ids.assign(ids.begin() + static_cast<long>(test_size), ids.end());
  return s;
}

std::vector<MoleculeId> sample_shots(const Split& split, std::size_t k,
                                     std::uint64_t seed) {
  if (k > split.train_ids.size()) {
    throw SizeError("cannot sample " + std::to_string(k) + " shots from " +
                    std::to_string(split.train_ids.size()) + " train ids");
  }
  if (k == 0) return {};
  auto pool = split.train_ids;
  Prng rng(derive_seed(seed, {"shots"}));
  shuffle_prefix(pool, rng, k);
  pool.resize(k);
  return pool;
}

nlohmann::json to_json(const Dataset& d) {
  nlohmann::json records = nlohmann::json::array();
  for (const auto& r : d.records) {
    records.push_back({{"id", r.id},
                       {"name", r.name ? nlohmann::json(*r.name) : nlohmann::json()},
                       {"smiles", r.smiles},
                       {"label", r.label},
                       {"label_text", r.label_text},
                       {"unit", r.unit}});
  }
  return {{"name", d.name},
          {"unit", d.unit},
          {"label_min", d.label_min},
          {"label_max", d.label_max},
          {"records", std::move(records)}};
}

}  // namespace blindbench
