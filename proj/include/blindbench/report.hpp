#pragma once

// Aggregation of finished runs into tables and plot-ready CSV files.
//
// Files written by emit_plot_data / write_report:
//   correlation_grid.csv   model_family,model_size,dataset,shots,run,r
//                          (zero-shot and level-1 runs; shots 0 is zero-shot)
//   blinding_levels.csv    model,dataset,level,shots,run,r   (levels 1..6)
//   cumulative_error.csv   model,dataset,threshold,fraction
//   table2.csv / .json     memorization table, per model x dataset
//   memorization.csv       model,dataset,source,n,matches,total,percent
//   summary_table.csv      per (model,dataset,level,shots): mean r, min, max, per-run values
//   level_matrix.csv       mean r per (model,dataset) x level 1..6
// An undefined correlation is written as an empty field.

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "blindbench/metrics.hpp"

namespace blindbench {

struct RunResult {
  std::string fingerprint;
  std::string model;
  std::string model_family;
  std::string model_size;
  std::string dataset;
  /// 0 for zero-shot.
  int level = 0;
  std::size_t shots = 0;
  int run_index = 0;
  MetricsSummary metrics;
  std::vector<PredictionRecord> records;
};

struct RunGroup {
  std::string model;
  std::string dataset;
  int level = 0;
  std::size_t shots = 0;
  /// Indices into ReportTables::runs.
  std::vector<std::size_t> runs;
  /// Mean over runs with a defined r.
  std::optional<double> mean_r;
  std::optional<double> min_r;
  std::optional<double> max_r;
};

struct MemorizationCell {
  /// "zeroshot" or "level1".
  std::string source;
  DigitMatchCounts n3;
  DigitMatchCounts n4;
};

struct ReportTables {
  /// Sorted by (model, dataset, level, shots, run, fingerprint).
  std::vector<RunResult> runs;
  std::vector<RunGroup> groups;
  /// Keyed by (model, dataset).
  std::map<std::pair<std::string, std::string>, MemorizationCell> memorization;
  std::vector<std::string> models;
  std::vector<std::string> datasets;
  /// Directories skipped because their run is not done.
  std::vector<std::string> incomplete;
};

/// Reads every finished run below `results_dir`. Throws EmptyReportError when
/// there is none.
ReportTables aggregate(const std::filesystem::path& results_dir);

void emit_plot_data(const ReportTables& t, const std::filesystem::path& out_dir);

/// Plot data plus table2, memorization, summary and level-matrix files.
void write_report(const ReportTables& t, const std::filesystem::path& out_dir);

nlohmann::json table2_json(const ReportTables& t);

}  // namespace blindbench
