// blindbench: run, resume and report blinded property-prediction studies.

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <filesystem>
#include <iostream>

#include "blindbench/config.hpp"
#include "blindbench/error.hpp"
#include "blindbench/report.hpp"
#include "blindbench/runner.hpp"

#ifndef BLINDBENCH_TEMPLATE_DIR
#define BLINDBENCH_TEMPLATE_DIR "templates"
#endif

namespace fs = std::filesystem;
using namespace blindbench;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

int execute(Experiment& exp, const std::vector<PlannedRun>& runs) {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  ExecuteHooks hooks;
  hooks.stop = &g_stop;
  int failed = 0;
  int pending = 0;
  for (const auto& run : runs) {
    if (g_stop) {
      ++pending;
      continue;
    }
    const auto rec = exp.execute(run, hooks);
    std::cout << run.fingerprint << "  " << to_string(rec.status) << "  "
              << run.descriptor.label();
    if (rec.status == RunStatus::kDone) {
      std::cout << "  r=" << (rec.summary.pearson_r ? std::to_string(*rec.summary.pearson_r)
                                                   : std::string("undefined"))
                << "  valid=" << rec.summary.n_valid << "/" << rec.summary.n_total;
    }
    if (!rec.error.empty()) std::cout << "  error: " << rec.error;
    std::cout << "\n";
    if (rec.status == RunStatus::kFailed) ++failed;
    if (rec.status == RunStatus::kRunning) ++pending;
  }
  if (pending > 0) {
    std::cerr << pending << " run(s) interrupted; continue with: blindbench resume "
              << exp.config().results_dir.string() << "\n";
    return 130;
  }
  return failed > 0 ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Blinded molecular property prediction benchmark"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Expand a config and execute its runs");
  std::string config_path;
  std::string only;
  bool dry_run = false;
  run->add_option("--config", config_path, "TOML experiment config")->required();
  run->add_option("--only", only, "Glob over run fingerprints");
  run->add_flag("--dry-run", dry_run, "List the planned runs without querying");

  auto* resume = app.add_subcommand("resume", "Continue the runs of a results directory");
  std::string resume_dir;
  resume->add_option("dir", resume_dir, "Results directory")->required();

  auto* report = app.add_subcommand("report", "Aggregate finished runs into tables");
  std::string report_dir;
  std::string report_out;
  report->add_option("dir", report_dir, "Results directory")->required();
  report->add_option("--out", report_out, "Output directory (default <dir>/report)");

  auto* validate = app.add_subcommand("validate-templates", "Check the prompt templates");
  std::string templates_dir = BLINDBENCH_TEMPLATE_DIR;
  validate->add_option("--templates", templates_dir, "Template root");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      auto cfg = load_config(config_path);
      Experiment exp(cfg, nullptr);
      const auto runs = exp.plan(only);
      if (dry_run) {
        for (const auto& r : runs) {
          std::cout << r.fingerprint << "  " << r.descriptor.label() << "\n";
        }
        std::cout << runs.size() << " run(s)\n";
        return 0;
      }
      write_experiment_manifest(cfg.results_dir, config_path);
      return execute(exp, runs);
    }
    if (*resume) {
      Experiment exp(load_experiment_manifest(resume_dir), nullptr);
      return execute(exp, exp.plan());
    }
    if (*report) {
      const auto tables = aggregate(report_dir);
      const fs::path out = report_out.empty() ? fs::path(report_dir) / "report" : fs::path(report_out);
      write_report(tables, out);
      std::cout << tables.runs.size() << " run(s) aggregated into " << out.string() << "\n";
      for (const auto& fp : tables.incomplete) std::cerr << "skipped unfinished run " << fp << "\n";
      return 0;
    }
    if (*validate) {
      const auto store = TemplateStore::load(templates_dir);
      const auto problems = validate_templates(store);
      for (const auto& p : problems) std::cerr << p << "\n";
      if (!problems.empty()) return 1;
      std::cout << "templates ok (version " << store.version().substr(0, 16) << ")\n";
      return 0;
    }
  } catch (const EmptyReportError& e) {
    std::cerr << "empty report: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
