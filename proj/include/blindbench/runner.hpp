#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "blindbench/config.hpp"
#include "blindbench/dataset.hpp"
#include "blindbench/llmclient.hpp"
#include "blindbench/metrics.hpp"
#include "blindbench/promptgen.hpp"
#include "blindbench/transform.hpp"

namespace blindbench {

struct RunDescriptor {
  ModelSpec model;
  std::string dataset;
  /// kZeroShotLevel or 1..6.
  int level = kZeroShotLevel;
  std::size_t shots = 0;
  int run_index = 0;
  std::size_t test_size = 0;
  std::uint64_t split_seed = 0;
  /// Shared by every level and model of a (dataset, shots, run) cell so
  /// that levels differ only in blinding.
  std::uint64_t shot_seed = 0;
  /// hash(split_seed, model, dataset, level, shots, run).
  std::uint64_t run_seed = 0;

  /// "model/dataset/level/shots/run", for logs.
  std::string label() const;
};

nlohmann::json to_json(const RunDescriptor& d);

/// Filtered Cartesian product in config order (model, dataset, level, shots,
/// run). Throws ConfigError when a configured level or shot count has no
/// valid partner.
std::vector<RunDescriptor> expand_matrix(const ExperimentConfig& cfg);

/// Seed of the synthetic backend for one run; independent of level and shot
/// count.
std::uint64_t synthetic_run_seed(std::uint64_t backend_seed, int run_index);

/// 16 hex digits of SHA-256 over the descriptor, template version and cipher
/// table hash.
std::string fingerprint(const RunDescriptor& d, std::string_view template_version,
                        std::string_view cipher_hash);

enum class RunStatus { kPending, kRunning, kDone, kFailed };

std::string_view to_string(RunStatus s);
RunStatus run_status_from_string(std::string_view s);

struct PlannedRun {
  RunDescriptor descriptor;
  std::string fingerprint;
};

struct RunRecord {
  std::string fingerprint;
  RunStatus status = RunStatus::kPending;
  std::vector<PredictionRecord> records;
  MetricsSummary summary;
  std::string started_at;
  std::string finished_at;
  std::string error;
  /// Molecules sent to the model by this call (0 for an already-done run).
  std::size_t queried = 0;
};

struct ExecuteHooks {
  /// Called before a molecule is queried.
  std::function<void(MoleculeId)> on_molecule_start;
  /// Checked before each molecule; when set, workers stop and the run stays
  /// resumable.
  const std::atomic<bool>* stop = nullptr;
};

class Experiment {
 public:
  Experiment(ExperimentConfig cfg, std::shared_ptr<ChatClient> client);

  const ExperimentConfig& config() const noexcept { return cfg_; }
  const TemplateStore& templates() const noexcept { return templates_; }

  const Dataset& dataset(const std::string& name);
  const SmilesCipher& cipher(const std::string& name);

  /// Descriptors with fingerprints; `only` is an fnmatch glob over
  /// fingerprints (empty selects all).
  std::vector<PlannedRun> plan(const std::string& only = "");

  std::filesystem::path run_dir(const PlannedRun& run) const;

  RunRecord execute(const PlannedRun& run, const ExecuteHooks& hooks = {});
  std::vector<RunRecord> execute_all(const std::vector<PlannedRun>& runs,
                                     const ExecuteHooks& hooks = {});

 private:
  struct DatasetState {
    Dataset data;
    std::optional<SmilesCipher> cipher;
    std::shared_ptr<const std::unordered_map<std::string, std::string>> lookup;
  };
  DatasetState& state(const std::string& name);

  ExperimentConfig cfg_;
  std::shared_ptr<ChatClient> client_;
  TemplateStore templates_;
  std::mutex mu_;
  std::map<std::string, std::unique_ptr<DatasetState>> datasets_;
};

/// Stores the config next to the results so `resume` can rebuild it.
void write_experiment_manifest(const std::filesystem::path& results_dir,
                               const std::filesystem::path& config_path);
ExperimentConfig load_experiment_manifest(const std::filesystem::path& results_dir);

/// Files of one run directory.
namespace run_files {
inline constexpr const char* kRecords = "records.jsonl";
inline constexpr const char* kRecordsPartial = "records.partial.jsonl";
inline constexpr const char* kTranscript = "transcript.jsonl.gz";
inline constexpr const char* kTranscriptPartial = "transcript.partial.jsonl.gz";
inline constexpr const char* kSummary = "summary.json";
inline constexpr const char* kRun = "run.json";
inline constexpr const char* kDescriptor = "descriptor.json";
inline constexpr const char* kCipher = "cipher.csv";
inline constexpr const char* kManifest = "experiment.json";
}  // namespace run_files

std::vector<PredictionRecord> read_records(const std::filesystem::path& jsonl);
/// Every complete line of a (possibly multi-member) gzip JSONL file.
std::vector<nlohmann::json> read_transcript(const std::filesystem::path& gz);
/// Writes via a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace blindbench
