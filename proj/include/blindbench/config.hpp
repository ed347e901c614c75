#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "blindbench/dataset.hpp"
#include "blindbench/llmclient.hpp"

namespace blindbench {

/// Level 0 stands for the zero-shot prompt.
inline constexpr int kZeroShotLevel = 0;

enum class LabelFit { kFullDataset, kTrainOnly };

struct DatasetConfig {
  std::string name;
  std::filesystem::path path;
  ColumnMapping mapping;
};

struct ExperimentConfig {
  std::vector<ModelSpec> models;
  std::vector<DatasetConfig> datasets;
  std::vector<int> levels;
  std::vector<std::size_t> shots;
  int runs = 2;
  std::uint64_t split_seed = 42;
  std::uint64_t cipher_seed = 42;
  std::size_t test_size_default = 150;
  std::size_t test_size_zeroshot = 1000;
  /// Workers per run.
  int concurrency = 1;
  /// Runs executed at the same time.
  int run_concurrency = 1;
  /// Reuse one shot sample for every run index.
  bool freeze_shots = false;
  LabelFit label_fit = LabelFit::kFullDataset;
  std::filesystem::path templates_dir;
  std::filesystem::path results_dir;
  std::map<std::string, ProviderConfig> providers;
};

/// Relative paths are resolved against `base_dir`. Throws ConfigError.
ExperimentConfig config_from_toml(const nlohmann::json& doc,
                                  const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig load_config_text(const std::string& toml_text,
                                  const std::filesystem::path& base_dir);

}  // namespace blindbench
