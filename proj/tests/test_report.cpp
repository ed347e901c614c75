#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "blindbench/csv.hpp"
#include "blindbench/error.hpp"
#include "blindbench/report.hpp"
#include "blindbench/runner.hpp"
#include "support/fixtures.hpp"

using namespace blindbench;
namespace fs = std::filesystem;

namespace {

PredictionRecord record(MoleculeId id, std::optional<double> pred, double truth, std::string text) {
  PredictionRecord r;
  r.molecule_id = id;
  r.truth_original_scale = truth;
  r.truth_prompt_scale = truth;
  r.truth_text = std::move(text);
  if (pred) {
    r.parsed = ParsedPrediction{*pred, ExtractionRule::kBareNumber, 0, 0};
    r.value_original_scale = pred;
    r.valid = true;
  }
  return r;
}

/// Writes a finished run directory with a forced correlation value.
void fake_run(const fs::path& root, const std::string& model, const std::string& ds, int level,
              std::size_t shots, int run, std::optional<double> r,
              const std::vector<PredictionRecord>& records, const std::string& status = "done") {
  RunDescriptor d;
  d.model.model_id = model;
  d.model.family = model + "-family";
  d.model.size = "7B";
  d.dataset = ds;
  d.level = level;
  d.shots = shots;
  d.run_index = run;
  const auto fp = fingerprint(d, "v", "");
  const auto dir = root / fp;
  fs::create_directories(dir);
  auto s = summarize(records);
  s.pearson_r = r;
  s.correlation_undefined = !r;
  nlohmann::json summary = {{"fingerprint", fp}, {"descriptor", to_json(d)}, {"metrics", to_json(s)}};
  std::ofstream(dir / run_files::kSummary) << summary.dump();
  std::ofstream(dir / run_files::kRun) << nlohmann::json{{"status", status}}.dump();
  std::ofstream out(dir / run_files::kRecords);
  for (const auto& rec : records) out << to_json(rec).dump() << "\n";
}

std::vector<csv::Row> read_csv(const fs::path& p) {
  std::ifstream in(p);
  return csv::read(in);
}

std::vector<PredictionRecord> sample_records() {
  return {record(0, -1.52, -1.52, "-1.52"), record(1, -2.0, -2.31, "-2.31"),
          record(2, std::nullopt, 0.5, "0.50"), record(3, 0.91, 0.9, "0.9")};
}

struct Results {
  fs::path root = fixtures::temp_dir("report");
  ~Results() { fs::remove_all(root); }
};

}  // namespace

TEST(Report, EmptyDirectoryIsAnError) {
  Results res;
  EXPECT_THROW(aggregate(res.root), EmptyReportError);
  EXPECT_THROW(aggregate(res.root / "missing"), EmptyReportError);
  fake_run(res.root, "m", "delaney", 1, 60, 0, 0.5, sample_records(), "running");
  EXPECT_THROW(aggregate(res.root), EmptyReportError);
}

TEST(Report, GroupsAverageDefinedCorrelations) {
  Results res;
  const auto recs = sample_records();
  fake_run(res.root, "m", "delaney", 1, 60, 0, 0.8, recs);
  fake_run(res.root, "m", "delaney", 1, 60, 1, 0.9, recs);
  fake_run(res.root, "m", "delaney", 2, 60, 0, std::nullopt, recs);
  fake_run(res.root, "m", "delaney", 3, 60, 0, 0.1, recs, "failed");
  const auto t = aggregate(res.root);
  ASSERT_EQ(t.runs.size(), 3u);
  EXPECT_EQ(t.incomplete.size(), 1u);
  ASSERT_EQ(t.groups.size(), 2u);
  EXPECT_NEAR(*t.groups[0].mean_r, 0.85, 1e-12);
  EXPECT_EQ(*t.groups[0].min_r, 0.8);
  EXPECT_EQ(*t.groups[0].max_r, 0.9);
  EXPECT_FALSE(t.groups[1].mean_r);
}

TEST(Report, CsvSchemas) {
  Results res;
  const auto recs = sample_records();
  fake_run(res.root, "m", "delaney", 0, 0, 0, 0.7, recs);
  fake_run(res.root, "m", "delaney", 1, 60, 0, 0.8, recs);
  fake_run(res.root, "m", "delaney", 1, 1000, 0, 0.9, recs);
  fake_run(res.root, "m", "qm7", 4, 60, 0, std::nullopt, recs);
  const auto out = res.root / "report";
  write_report(aggregate(res.root), out);

  const auto grid = read_csv(out / "correlation_grid.csv");
  EXPECT_EQ(grid[0], (csv::Row{"model_family", "model_size", "dataset", "shots", "run", "r"}));
  ASSERT_EQ(grid.size(), 4u);
  EXPECT_EQ(grid[1], (csv::Row{"m-family", "7B", "delaney", "0", "0", "0.7"}));

  const auto levels = read_csv(out / "blinding_levels.csv");
  EXPECT_EQ(levels[0], (csv::Row{"model", "dataset", "level", "shots", "run", "r"}));
  ASSERT_EQ(levels.size(), 4u);
  EXPECT_EQ(levels[3], (csv::Row{"m", "qm7", "4", "60", "0", ""}));

  const auto cum = read_csv(out / "cumulative_error.csv");
  EXPECT_EQ(cum[0], (csv::Row{"model", "dataset", "threshold", "fraction"}));
  ASSERT_EQ(cum.size(), 102u);
  EXPECT_EQ(cum[1][3], "0.25");
  EXPECT_EQ(cum[101][3], "0.75");
  for (std::size_t i = 2; i < cum.size(); ++i) {
    EXPECT_GE(std::stod(cum[i][3]), std::stod(cum[i - 1][3]));
  }

  const auto t2 = read_csv(out / "table2.csv");
  EXPECT_EQ(t2[0], (csv::Row{"model", "delaney matches", "delaney total", "delaney %", "qm7 matches",
                             "qm7 total", "qm7 %"}));
  // zero-shot source: -1.52 matches; -2.0 vs -2.31 does not; 0.9 ineligible; invalid skipped.
  EXPECT_EQ(t2[1][1], "1");
  EXPECT_EQ(t2[1][2], "2");
  EXPECT_EQ(t2[1][3], "50.00");

  const auto j = nlohmann::json::parse(fixtures::read_file(out / "table2.json"));
  EXPECT_EQ(j["rows"][0]["delaney"]["source"], "zeroshot");

  const auto mem = read_csv(out / "memorization.csv");
  EXPECT_EQ(mem[0], (csv::Row{"model", "dataset", "source", "n", "matches", "total", "percent",
                              "retention"}));
  const auto summary = read_csv(out / "summary_table.csv");
  EXPECT_EQ(summary[0][0], "model");
  EXPECT_EQ(summary.size(), 5u);
  const auto matrix = read_csv(out / "level_matrix.csv");
  EXPECT_EQ(matrix[0], (csv::Row{"model", "dataset", "shots", "1", "2", "3", "4", "5", "6"}));
}

TEST(Report, DeterministicAndPure) {
  Results res;
  const auto recs = sample_records();
  fake_run(res.root, "b", "delaney", 1, 60, 0, 0.8, recs);
  fake_run(res.root, "a", "qm7", 0, 0, 1, 0.3, recs);
  fake_run(res.root, "a", "qm7", 0, 0, 0, 0.2, recs);
  std::vector<std::string> snapshot;
  for (const auto& e : fs::recursive_directory_iterator(res.root)) {
    if (e.is_regular_file()) snapshot.push_back(e.path().string() + fixtures::read_file(e.path()));
  }
  write_report(aggregate(res.root), res.root / "r1");
  write_report(aggregate(res.root), res.root / "r2");
  for (const auto& e : fs::directory_iterator(res.root / "r1")) {
    EXPECT_EQ(fixtures::read_file(e.path()),
              fixtures::read_file(res.root / "r2" / e.path().filename()));
  }
  std::vector<std::string> after;
  for (const auto& e : fs::recursive_directory_iterator(res.root)) {
    if (e.is_regular_file() && e.path().string().find("/r1/") == std::string::npos &&
        e.path().string().find("/r2/") == std::string::npos) {
      after.push_back(e.path().string() + fixtures::read_file(e.path()));
    }
  }
  std::sort(snapshot.begin(), snapshot.end());
  std::sort(after.begin(), after.end());
  EXPECT_EQ(snapshot, after);
  const auto t = aggregate(res.root);
  EXPECT_EQ(t.runs[0].model, "a");
  EXPECT_EQ(t.runs[0].run_index, 0);
}
