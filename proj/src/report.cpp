#include "blindbench/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include "blindbench/csv.hpp"
#include "blindbench/error.hpp"
#include "blindbench/runner.hpp"
#include "blindbench/text.hpp"

namespace blindbench {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot read " + p.string());
  auto j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error("malformed " + p.string());
  return j;
}

std::string fmt_r(const std::optional<double>& r) { return r ? shortest_repr(*r) : ""; }

std::string pct(const DigitMatchCounts& c) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * c.rate());
  return buf;
}

std::string level_name(int level) { return level == 0 ? "zeroshot" : std::to_string(level); }

class CsvOut {
 public:
  explicit CsvOut(std::vector<std::string> header) { row(header); }
  void row(const std::vector<std::string>& fields) { csv::write_row(ss_, fields); }
  void save(const fs::path& p) const { write_file_atomic(p, ss_.str()); }

 private:
  std::ostringstream ss_;
};

}  // namespace

ReportTables aggregate(const fs::path& results_dir) {
  if (!fs::is_directory(results_dir)) {
    throw EmptyReportError("no results directory " + results_dir.string());
  }
  ReportTables t;
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(results_dir)) {
    if (e.is_directory() && fs::exists(e.path() / run_files::kRun)) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());
  for (const auto& dir : dirs) {
    const auto run = read_json(dir / run_files::kRun);
    if (run.value("status", "") != "done") {
      t.incomplete.push_back(dir.filename().string());
      continue;
    }
    const auto summary = read_json(dir / run_files::kSummary);
    const auto& d = summary.at("descriptor");
    RunResult r;
    r.fingerprint = summary.at("fingerprint").get<std::string>();
    r.model = d.at("model").at("id").get<std::string>();
    r.model_family = d.at("model").value("family", r.model);
    r.model_size = d.at("model").value("size", "");
    r.dataset = d.at("dataset").get<std::string>();
    r.level = d.at("level").is_string() ? 0 : d.at("level").get<int>();
    r.shots = d.at("shots").get<std::size_t>();
    r.run_index = d.at("run").get<int>();
    r.metrics = metrics_summary_from_json(summary.at("metrics"));
    r.records = read_records(dir / run_files::kRecords);
    t.runs.push_back(std::move(r));
  }
  if (t.runs.empty()) throw EmptyReportError("no completed runs in " + results_dir.string());

  std::sort(t.runs.begin(), t.runs.end(), [](const RunResult& a, const RunResult& b) {
    return std::tie(a.model, a.dataset, a.level, a.shots, a.run_index, a.fingerprint) <
           std::tie(b.model, b.dataset, b.level, b.shots, b.run_index, b.fingerprint);
  });

  std::set<std::string> models;
  std::set<std::string> datasets;
  for (const auto& r : t.runs) {
    models.insert(r.model);
    datasets.insert(r.dataset);
    if (t.groups.empty() || t.groups.back().model != r.model ||
        t.groups.back().dataset != r.dataset || t.groups.back().level != r.level ||
        t.groups.back().shots != r.shots) {
      t.groups.push_back({r.model, r.dataset, r.level, r.shots, {}, {}, {}, {}});
    }
    t.groups.back().runs.push_back(static_cast<std::size_t>(&r - t.runs.data()));
  }
  for (auto& g : t.groups) {
    double sum = 0.0;
    int n = 0;
    for (auto i : g.runs) {
      const auto& r = t.runs[i];
      if (!r.metrics.pearson_r) continue;
      const double v = *r.metrics.pearson_r;
      sum += v;
      ++n;
      g.min_r = g.min_r ? std::min(*g.min_r, v) : v;
      g.max_r = g.max_r ? std::max(*g.max_r, v) : v;
    }
    if (n > 0) g.mean_r = sum / n;
  }
  t.models.assign(models.begin(), models.end());
  t.datasets.assign(datasets.begin(), datasets.end());

  // Memorization: zero-shot runs, else level-1 runs.
  const int ns[] = {3, 4};
  for (const auto& m : t.models) {
    for (const auto& ds : t.datasets) {
      for (int source : {0, 1}) {
        std::vector<PredictionRecord> pooled;
        for (const auto& r : t.runs) {
          if (r.model == m && r.dataset == ds && r.level == source) {
            pooled.insert(pooled.end(), r.records.begin(), r.records.end());
          }
        }
        if (pooled.empty()) continue;
        const auto counts = memorization_summary(pooled, ns);
        t.memorization[{m, ds}] = {source == 0 ? "zeroshot" : "level1", counts.at(3),
                                   counts.at(4)};
        break;
      }
    }
  }
  return t;
}

void emit_plot_data(const ReportTables& t, const fs::path& out_dir) {
  fs::create_directories(out_dir);

  CsvOut grid({"model_family", "model_size", "dataset", "shots", "run", "r"});
  for (const auto& r : t.runs) {
    if (r.level > 1) continue;
    grid.row({r.model_family, r.model_size, r.dataset, std::to_string(r.shots),
              std::to_string(r.run_index), fmt_r(r.metrics.pearson_r)});
  }
  grid.save(out_dir / "correlation_grid.csv");

  CsvOut levels({"model", "dataset", "level", "shots", "run", "r"});
  for (const auto& r : t.runs) {
    if (r.level < 1) continue;
    levels.row({r.model, r.dataset, std::to_string(r.level), std::to_string(r.shots),
                std::to_string(r.run_index), fmt_r(r.metrics.pearson_r)});
  }
  levels.save(out_dir / "blinding_levels.csv");

  // Zero-shot records when present, else level-1 records at the smallest
  // shot count.
  CsvOut cum({"model", "dataset", "threshold", "fraction"});
  for (const auto& m : t.models) {
    for (const auto& ds : t.datasets) {
      std::vector<PredictionRecord> recs;
      std::optional<std::pair<int, std::size_t>> chosen;
      for (const auto& r : t.runs) {
        if (r.model != m || r.dataset != ds || r.level > 1) continue;
        const std::pair<int, std::size_t> key{r.level, r.shots};
        if (!chosen || key < *chosen) chosen = key;
      }
      if (!chosen) continue;
      for (const auto& r : t.runs) {
        if (r.model == m && r.dataset == ds && r.level == chosen->first &&
            r.shots == chosen->second) {
          recs.insert(recs.end(), r.records.begin(), r.records.end());
        }
      }
      double max_err = 0.0;
      bool any_valid = false;
      for (const auto& rec : recs) {
        if (rec.valid && rec.value_original_scale) {
          any_valid = true;
          max_err = std::max(max_err, std::abs(*rec.value_original_scale - rec.truth_original_scale));
        }
      }
      if (!any_valid) continue;
      std::vector<double> thresholds;
      for (int i = 0; i <= 100; ++i) thresholds.push_back(max_err * i / 100.0);
      for (const auto& [th, frac] : cumulative_error_curve(recs, thresholds)) {
        cum.row({m, ds, shortest_repr(th), shortest_repr(frac)});
      }
    }
  }
  cum.save(out_dir / "cumulative_error.csv");
}

json table2_json(const ReportTables& t) {
  json rows = json::array();
  for (const auto& m : t.models) {
    json row = {{"model", m}};
    for (const auto& ds : t.datasets) {
      const auto it = t.memorization.find({m, ds});
      if (it == t.memorization.end()) {
        row[ds] = nullptr;
        continue;
      }
      const auto& c = it->second.n3;
      row[ds] = {{"matches", c.matches},
                 {"total", c.eligible},
                 {"percent", 100.0 * c.rate()},
                 {"source", it->second.source}};
    }
    rows.push_back(std::move(row));
  }
  return {{"title", "Exact matches (first 3 significant digits)"},
          {"datasets", t.datasets},
          {"rows", std::move(rows)}};
}

void write_report(const ReportTables& t, const fs::path& out_dir) {
  emit_plot_data(t, out_dir);

  std::vector<std::string> header{"model"};
  for (const auto& ds : t.datasets) {
    header.push_back(ds + " matches");
    header.push_back(ds + " total");
    header.push_back(ds + " %");
  }
  CsvOut table2(header);
  for (const auto& m : t.models) {
    std::vector<std::string> row{m};
    for (const auto& ds : t.datasets) {
      const auto it = t.memorization.find({m, ds});
      if (it == t.memorization.end()) {
        row.insert(row.end(), {"", "", ""});
        continue;
      }
      const auto& c = it->second.n3;
      row.push_back(std::to_string(c.matches));
      row.push_back(std::to_string(c.eligible));
      row.push_back(pct(c));
    }
    table2.row(row);
  }
  table2.save(out_dir / "table2.csv");
  write_file_atomic(out_dir / "table2.json", table2_json(t).dump(2) + "\n");

  CsvOut mem({"model", "dataset", "source", "n", "matches", "total", "percent", "retention"});
  for (const auto& [key, cell] : t.memorization) {
    std::map<int, DigitMatchCounts> counts{{3, cell.n3}, {4, cell.n4}};
    const auto ret = retention(counts);
    mem.row({key.first, key.second, cell.source, "3", std::to_string(cell.n3.matches),
             std::to_string(cell.n3.eligible), pct(cell.n3), ""});
    mem.row({key.first, key.second, cell.source, "4", std::to_string(cell.n4.matches),
             std::to_string(cell.n4.eligible), pct(cell.n4), ret ? shortest_repr(*ret) : ""});
  }
  mem.save(out_dir / "memorization.csv");

  CsvOut summary({"model", "dataset", "level", "shots", "runs", "mean_r", "min_r", "max_r",
                  "run_r", "mean_mae", "valid", "total", "fingerprints"});
  for (const auto& g : t.groups) {
    std::vector<std::string> run_r;
    std::vector<std::string> fps;
    double mae = 0.0;
    int n_mae = 0;
    std::size_t valid = 0;
    std::size_t total = 0;
    for (auto i : g.runs) {
      const auto& r = t.runs[i];
      run_r.push_back(fmt_r(r.metrics.pearson_r));
      fps.push_back(r.fingerprint);
      if (r.metrics.mae) {
        mae += *r.metrics.mae;
        ++n_mae;
      }
      valid += r.metrics.n_valid;
      total += r.metrics.n_total;
    }
    summary.row({g.model, g.dataset, level_name(g.level), std::to_string(g.shots),
                 std::to_string(g.runs.size()), fmt_r(g.mean_r), fmt_r(g.min_r), fmt_r(g.max_r),
                 join(run_r, ";"), n_mae ? shortest_repr(mae / n_mae) : "",
                 std::to_string(valid), std::to_string(total), join(fps, ";")});
  }
  summary.save(out_dir / "summary_table.csv");

  CsvOut matrix({"model", "dataset", "shots", "1", "2", "3", "4", "5", "6"});
  std::set<std::tuple<std::string, std::string, std::size_t>> cells;
  for (const auto& g : t.groups) {
    if (g.level >= 1) cells.insert({g.model, g.dataset, g.shots});
  }
  for (const auto& [m, ds, shots] : cells) {
    std::vector<std::string> row{m, ds, std::to_string(shots)};
    for (int level = 1; level <= 6; ++level) {
      std::optional<double> v;
      for (const auto& g : t.groups) {
        if (g.model == m && g.dataset == ds && g.shots == shots && g.level == level) v = g.mean_r;
      }
      row.push_back(fmt_r(v));
    }
    matrix.row(row);
  }
  matrix.save(out_dir / "level_matrix.csv");
}

}  // namespace blindbench
