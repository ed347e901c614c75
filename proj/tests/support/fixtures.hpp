#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "blindbench/config.hpp"
#include "blindbench/dataset.hpp"
#include "blindbench/promptgen.hpp"

namespace blindbench::fixtures {

/// Shape of generated labels.
enum class LabelStyle {
  /// Two decimals around -3 (delaney-like, "-3.27").
  kLogScale,
  /// Three decimals around -1500 (qm7-like, "-1407.837").
  kEnergy,
};

/// Deterministic CSV with columns name,smiles,value: `n` distinct SMILES from
/// a small fragment grammar; labels depend on token count plus noise.
std::string synthetic_csv(std::size_t n, std::uint64_t seed,
                          LabelStyle style = LabelStyle::kLogScale);

/// Loads `synthetic_csv` under the dataset name `name`.
Dataset synthetic_dataset(const std::string& name, std::size_t n, std::uint64_t seed,
                          LabelStyle style = LabelStyle::kLogScale);

/// Writes `synthetic_csv` to `dir/<name>.csv` and returns a matching config.
DatasetConfig write_synthetic_dataset(const std::filesystem::path& dir,
                                      const std::string& name, std::size_t n,
                                      std::uint64_t seed,
                                      LabelStyle style = LabelStyle::kLogScale);

ColumnMapping synthetic_mapping();

/// Fresh empty directory under the system temp dir.
std::filesystem::path temp_dir(const std::string& tag);

std::filesystem::path template_dir();
std::filesystem::path source_dir();

std::string read_file(const std::filesystem::path& p);


/// One rendered prompt over a synthetic dataset, with the input strings shown
/// in it.
struct GoldenCase {
  std::string key;  // "<dataset>_<zeroshot|1..6>_<shots>"
  int level = 0;
  PromptBundle bundle;
  std::vector<std::string> inputs;
};

/// Every dataset x level x shot tier (zero-shot, 60, 1000) combination for
/// the templates in `template_dir()`.
std::vector<GoldenCase> golden_cases();

std::filesystem::path golden_dir();

}  // namespace blindbench::fixtures
