// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any FAIL.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "blindbench/dataset.hpp"
#include "blindbench/error.hpp"
#include "blindbench/metrics.hpp"
#include "blindbench/promptgen.hpp"
#include "blindbench/rng.hpp"
#include "blindbench/runner.hpp"
#include "blindbench/text.hpp"
#include "blindbench/transform.hpp"
#include "oracles.hpp"
#include "support/fixtures.hpp"

#ifndef BLINDBENCH_DATA_DIR
#error "BLINDBENCH_DATA_DIR must be defined"
#endif

using namespace blindbench;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  enum Status { kPass, kFail, kSkip } status = kPass;
  std::string detail;
};

struct Detail {
  std::ostringstream out;
  bool ok = true;

  void check(bool cond, const std::string& what) {
    if (!cond) ok = false;
    note(std::string(cond ? "" : "FAILED ") + what);
  }
  void note(const std::string& what) {
    if (out.tellp() > 0) out << "; ";
    out << what;
  }
  Outcome outcome() const { return {ok ? Outcome::kPass : Outcome::kFail, out.str()}; }
};

std::string num(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

fs::path data_dir() {
  if (const char* env = std::getenv("BLINDBENCH_DATA_DIR"); env && *env) return env;
  return BLINDBENCH_DATA_DIR;
}

fs::path canonical_path(const std::string& name) {
  return data_dir() / default_mapping(name).default_file;
}

/// Canonical datasets present on disk, loaded once.
const std::map<std::string, Dataset>& canonical_datasets() {
  static const auto loaded = [] {
    std::map<std::string, Dataset> out;
    for (const auto& name : canonical_dataset_names()) {
      if (fs::exists(canonical_path(name))) {
        out.emplace(name, load_dataset(canonical_path(name), name, default_mapping(name)));
      }
    }
    return out;
  }();
  return loaded;
}

std::vector<std::string> missing_datasets() {
  std::vector<std::string> out;
  for (const auto& name : canonical_dataset_names()) {
    if (!canonical_datasets().contains(name)) out.push_back(canonical_path(name).string());
  }
  return out;
}

void require_all_datasets(Detail& d) {
  for (const auto& p : missing_datasets()) d.check(false, "missing " + p);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string quoted(const fs::path& p) { return "\"" + p.generic_string() + "\""; }

const char* kSyntheticModels = R"(
[[models]]
id = "memorizer"
provider = "synthetic"
[models.synthetic]
kind = "memorizer"

[[models]]
id = "prior"
provider = "synthetic"
[models.synthetic]
kind = "prior-model"
seed = 3
intercept = 1.0
slope = -0.18
noise_scale = 0.6

[[models]]
id = "icl"
provider = "synthetic"
[models.synthetic]
kind = "icl-regressor"
)";

const RunRecord* find_run(const std::vector<PlannedRun>& plan, const std::vector<RunRecord>& res,
                          const std::string& model, int level) {
  for (std::size_t i = 0; i < plan.size(); ++i) {
    if (plan[i].descriptor.model.model_id == model && plan[i].descriptor.level == level) {
      return &res[i];
    }
  }
  return nullptr;
}

Outcome label_round_trip() {
  Detail d;
  require_all_datasets(d);
  const auto t0 = std::chrono::steady_clock::now();
  for (const auto& [name, data] : canonical_datasets()) {
    const auto labels = data.labels();
    const auto t = LabelTransform::fit(labels, name);
    double worst = 0.0;
    std::vector<std::pair<double, double>> pairs;
    pairs.reserve(labels.size());
    for (double y : labels) {
      const double v = t.apply(y);
      worst = std::max(worst, std::abs(t.invert(v) - y) / std::max(1.0, std::abs(y)));
      pairs.emplace_back(y, v);
    }
    const double at_max = t.apply(data.label_max);
    const double at_min = t.apply(data.label_min);
    const double r = pearson(pairs);
    d.check(worst <= 1e-9 && at_max == 0.0 && at_min == 100.0 && r == -1.0,
            name + " n=" + std::to_string(labels.size()) + " worst rel err " + num(worst, 3) +
                " extrema {" + num(at_max, 17) + ", " + num(at_min, 17) + "} r=" + num(r, 17));
  }
  const double elapsed = seconds_since(t0);
  d.check(elapsed < 1.0, "runtime " + num(elapsed, 3) + " s");
  return d.outcome();
}

std::vector<std::string> audit_corpus() {
  std::ifstream in(fixtures::source_dir() / "tests/data/audit_smiles.txt");
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

Outcome cipher_soundness() {
  Detail d;
  require_all_datasets(d);
  const auto t0 = std::chrono::steady_clock::now();
  for (const auto& [name, data] : canonical_datasets()) {
    const auto smiles = data.smiles();
    const auto cipher = build_cipher(collect_vocabulary(smiles), derive_seed(42, {name}));
    std::size_t round_trips = 0;
    std::size_t raw_chars = 0;
    for (const auto& s : smiles) {
      const auto enc = cipher.encipher(s);
      round_trips += cipher.decipher(enc) == s;
      raw_chars += std::count_if(enc.begin(), enc.end(), [](char c) {
        return static_cast<unsigned char>(c) < 0x80 && is_smiles_character(c);
      });
    }
    d.check(round_trips == smiles.size() && raw_chars == 0,
            name + " round-trip " + std::to_string(round_trips) + "/" +
                std::to_string(smiles.size()) + ", raw SMILES characters " +
                std::to_string(raw_chars));
  }
  const auto corpus = audit_corpus();
  std::size_t agree = 0;
  for (const auto& s : corpus) {
    std::vector<std::string> ours;
    for (const auto& tok : tokenize_smiles(s)) ours.push_back(tok.text);
    agree += ours == oracles::reference_tokenize(s);
  }
  d.check(corpus.size() == 50 && agree == corpus.size(),
          "reference tokenizer agreement " + std::to_string(agree) + "/" + std::to_string(corpus.size()));
  const double elapsed = seconds_since(t0);
  d.check(elapsed < 5.0, "runtime " + num(elapsed, 3) + " s");
  return d.outcome();
}

Outcome synthetic_discrimination() {
  Detail d;
  if (!canonical_datasets().contains("delaney")) {
    d.check(false, "missing " + canonical_path("delaney").string());
    return d.outcome();
  }
  const auto t0 = std::chrono::steady_clock::now();
  const auto dir = fixtures::temp_dir("acceptance-discrimination");
  const auto text = "[experiment]\ndatasets = [\"delaney\"]\nlevels = [\"zeroshot\", 1, 2, 6]\n"
                    "shots = [0, 60]\nruns = 1\nsplit_seed = 42\ntest_size = 150\n"
                    "test_size_zeroshot = 150\nconcurrency = 4\nrun_concurrency = 4\n"
                    "templates_dir = " + quoted(fixtures::template_dir()) +
                    "\ndata_dir = " + quoted(data_dir()) +
                    "\nresults_dir = " + quoted(dir / "results") + "\n" + kSyntheticModels;
  Experiment e(load_config_text(text, dir), std::make_shared<ChatClient>());
  const auto plan = e.plan();
  const auto res = e.execute_all(plan);
  for (const auto& r : res) {
    if (r.status != RunStatus::kDone) d.check(false, "run " + r.fingerprint + " " + r.error);
  }

  const auto* mem1 = find_run(plan, res, "memorizer", 1);
  const auto* mem2 = find_run(plan, res, "memorizer", 2);
  const auto* icl1 = find_run(plan, res, "icl", 1);
  const auto* icl6 = find_run(plan, res, "icl", 6);
  const auto* prior0 = find_run(plan, res, "prior", kZeroShotLevel);
  const auto* prior1 = find_run(plan, res, "prior", 1);
  if (!mem1 || !mem2 || !icl1 || !icl6 || !prior0 || !prior1) {
    d.check(false, "expected runs missing from plan");
    fs::remove_all(dir);
    return d.outcome();
  }

  const auto& m1 = mem1->summary.exact_match_3;
  const double thresholds[] = {1e-9};
  const auto step = cumulative_error_curve(mem1->records, thresholds);
  d.check(m1.eligible > 0 && m1.rate() >= 0.99 && step[0].second >= 0.99,
          "(a) memorizer L1 exact_match_3 " + std::to_string(m1.matches) + "/" +
              std::to_string(m1.eligible) + ", fraction with error <= 1e-9: " +
              num(step[0].second, 4));
  const auto& m2 = mem2->summary.exact_match_3;
  d.check(m2.eligible > 0 && m2.rate() <= 0.02,
          "(b) memorizer L2 exact_match_3 " + std::to_string(m2.matches) + "/" +
              std::to_string(m2.eligible));
  const bool icl_ok = icl1->summary.pearson_r && icl6->summary.pearson_r;
  const double icl_diff =
      icl_ok ? std::abs(std::abs(*icl1->summary.pearson_r) - std::abs(*icl6->summary.pearson_r)) : 1.0;
  d.check(icl_ok && icl_diff <= 1e-9,
          "(c) icl |r| L1 " + (icl_ok ? num(*icl1->summary.pearson_r, 12) : "undefined") +
              " vs L6 " + (icl_ok ? num(*icl6->summary.pearson_r, 12) : "undefined") +
              " diff " + num(icl_diff, 3));
  const bool prior_ok = prior0->summary.pearson_r && prior1->summary.pearson_r;
  const double prior_diff =
      prior_ok ? std::abs(*prior0->summary.pearson_r - *prior1->summary.pearson_r) : 1.0;
  d.check(prior_ok && prior_diff <= 1e-9,
          "(d) prior-model r 0-shot " + (prior_ok ? num(*prior0->summary.pearson_r, 12) : "undefined") +
              " vs 60-shot " + (prior_ok ? num(*prior1->summary.pearson_r, 12) : "undefined") +
              " diff " + num(prior_diff, 3));
  fs::remove_all(dir);
  const double elapsed = seconds_since(t0);
  d.check(elapsed < 120.0, "runtime " + num(elapsed, 3) + " s");
  return d.outcome();
}

/// Retention of random n=3 agreements at n=4 for a prior-model backend on a
/// synthetic dataset with atomization-energy-scale labels.
std::optional<double> prior_model_retention(std::map<int, DigitMatchCounts>& counts) {
  const auto dir = fixtures::temp_dir("acceptance-retention");
  fixtures::write_synthetic_dataset(dir / "data", "qm7", 6834, 11, fixtures::LabelStyle::kEnergy);
  const std::string text =
      "[experiment]\ndatasets = [\"qm7\"]\nlevels = [\"zeroshot\"]\nshots = [0]\nruns = 1\n"
      "test_size_zeroshot = 6000\nconcurrency = 4\ntemplates_dir = " +
      quoted(fixtures::template_dir()) +
      "\nresults_dir = \"results\"\n"
      "[datasets.qm7]\npath = \"qm7.csv\"\nsmiles_column = \"smiles\"\nlabel_column = \"value\"\n"
      "[[models]]\nid = \"prior\"\nprovider = \"synthetic\"\n[models.synthetic]\n"
      "kind = \"prior-model\"\nseed = 5\nintercept = -300.0\nslope = -95.0\nnoise_scale = 40.0\n";
  Experiment e(load_config_text(text, dir), std::make_shared<ChatClient>());
  const auto plan = e.plan();
  const auto run = e.execute(plan.at(0));
  fs::remove_all(dir);
  const int ns[] = {3, 4};
  counts = memorization_summary(run.records, ns);
  return retention(counts);
}

Outcome metrics_oracle() {
  Detail d;
  const std::vector<std::pair<double, double>> pairs{{1, 2}, {2, 1}, {3, 4}, {4, 3}, {5, 6}};
  const double lib = pearson(pairs);
  const double brute = oracles::pearson_brute_force(pairs);
  d.check(std::abs(lib - brute) <= 1e-12,
          "pearson " + num(lib, 17) + " vs brute force " + num(brute, 17));
  d.check(std::abs(lib - 0.8) <= 1e-12,
          "expected literal 0.8 (brute force disagrees by " + num(brute - 0.8, 6) + ")");

  const auto corpus = oracles::digit_fuzz_corpus(10000, 2024);
  std::size_t agree = 0;
  for (const auto& c : corpus) {
    const auto got = significant_digit_match(
        c.pred, c.truth, c.n,
        c.use_text ? std::optional<std::string_view>(c.truth_text) : std::nullopt);
    agree += got == oracles::digit_match(c.pred, c.truth_text, c.n);
  }
  d.check(agree == 10000, "digit fuzz agreement " + std::to_string(agree) + "/10000");

  std::map<int, DigitMatchCounts> counts;
  const auto ret = prior_model_retention(counts);
  d.check(ret && *ret >= 0.05 && *ret <= 0.20,
          "prior-model retention " + (ret ? num(*ret, 4) : std::string("undefined")) + " (" +
              std::to_string(counts[4].matches) + " at n=4 / " + std::to_string(counts[3].matches) +
              " at n=3)");
  return d.outcome();
}

Outcome vocabulary_lint() {
  Detail d;
  const auto store = TemplateStore::load(fixtures::template_dir());
  std::size_t files = 0;
  std::size_t checked = 0;
  std::size_t hits = 0;
  for (const auto& entry : fs::directory_iterator(fixtures::golden_dir())) {
    if (entry.path().extension() != ".json") continue;
    ++files;
    const auto doc = nlohmann::json::parse(fixtures::read_file(entry.path()));
    const auto& bundle = doc.at("bundle");
    const int level = bundle.at("meta").at("level").get<int>();
    if (level < 3) continue;
    ++checked;
    const auto ds = bundle.at("meta").at("dataset").get<std::string>();
    std::string all;
    for (const char* part : {"system", "analysis", "sample_list", "prediction"}) {
      if (bundle.contains(part) && bundle[part].is_string()) all += bundle[part].get<std::string>() + "\n";
    }
    all = to_lower(all);
    for (const auto& term : banned_terms(BlindingLevel::from_number(level), ds)) {
      if (all.find(term) != std::string::npos) {
        ++hits;
        d.check(false, entry.path().filename().string() + " contains '" + term + "'");
      }
    }
    if (level >= 5) {
      for (const auto& in : doc.at("inputs")) {
        const auto s = in.get<std::string>();
        if (std::any_of(s.begin(), s.end(), [](char c) { return is_smiles_character(c); })) {
          ++hits;
          d.check(false, entry.path().filename().string() + " shows raw input " + s);
        }
      }
    }
  }
  const auto expected = store.datasets().size() * 13;
  d.check(files == expected, std::to_string(files) + " golden fixtures (expected " +
                                 std::to_string(expected) + ")");
  d.note(std::to_string(checked) + " generic/agnostic bundles scanned, " + std::to_string(hits) +
         " banned occurrences");
  return d.outcome();
}

Outcome matrix_accounting() {
  Detail d;
  const auto configs = fixtures::source_dir() / "configs";
  const auto unblinded = expand_matrix(load_config(configs / "unblinded.toml")).size();
  const auto blinded = expand_matrix(load_config(configs / "blinded_gemini.toml")).size();
  d.check(unblinded == 162, "unblinded study " + std::to_string(unblinded) + " runs");
  d.check(blinded == 36, "blinded study " + std::to_string(blinded) + " runs");

  const auto dir = fixtures::temp_dir("acceptance-resume");
  fixtures::write_synthetic_dataset(dir / "data", "delaney", 300, 5);
  const std::string text =
      "[experiment]\ndatasets = [\"delaney\"]\nlevels = [1]\nshots = [60]\nruns = 1\n"
      "test_size = 40\nconcurrency = 3\ntemplates_dir = " + quoted(fixtures::template_dir()) +
      "\nresults_dir = \"results\"\n"
      "[datasets.delaney]\npath = \"delaney.csv\"\nsmiles_column = \"smiles\"\n"
      "label_column = \"value\"\nname_column = \"name\"\n" + kSyntheticModels;
  const auto cfg = load_config_text(text, dir);
  Experiment e(cfg, std::make_shared<ChatClient>());
  const auto run = e.plan().at(0);
  std::atomic<bool> stop{false};
  std::atomic<int> started{0};
  ExecuteHooks interrupt;
  interrupt.stop = &stop;
  interrupt.on_molecule_start = [&](MoleculeId) {
    if (++started >= 15) stop = true;
  };
  const auto first = e.execute(run, interrupt);
  const auto completed = read_records(e.run_dir(run) / run_files::kRecordsPartial);
  std::set<MoleculeId> done;
  for (const auto& r : completed) done.insert(r.molecule_id);

  Experiment again(cfg, std::make_shared<ChatClient>());
  std::set<MoleculeId> requeried;
  ExecuteHooks watch;
  watch.on_molecule_start = [&](MoleculeId id) { requeried.insert(id); };
  const auto second = again.execute(run, watch);
  std::size_t overlap = 0;
  for (auto id : requeried) overlap += done.contains(id);
  d.check(first.status == RunStatus::kRunning && !done.empty() && second.status == RunStatus::kDone &&
              second.records.size() == 40 && overlap == 0,
          "resume after interruption at " + std::to_string(done.size()) + "/40: re-queried " +
              std::to_string(overlap) + " completed, queried " + std::to_string(second.queried) +
              " remaining");
  const auto third = again.execute(run, watch);
  d.check(third.queried == 0, "finished run re-queried " + std::to_string(third.queried));
  fs::remove_all(dir);
  return d.outcome();
}

Outcome dataset_integrity() {
  Detail d;
  require_all_datasets(d);
  for (const auto& [name, data] : canonical_datasets()) {
    const auto expected = *canonical_size(name);
    d.check(data.records.size() == expected,
            name + " " + std::to_string(data.records.size()) + " rows (expected " +
                std::to_string(expected) + ")");
    const auto reloaded = load_dataset(canonical_path(name), name, default_mapping(name));
    for (std::size_t size : {std::size_t{150}, std::size_t{1000}}) {
      const auto a = make_split(data, 42, size);
      const auto b = make_split(reloaded, 42, size);
      d.check(a == b && a.test_ids.size() == size,
              name + " split " + std::to_string(size) + (a == b ? " reproducible" : " differs"));
    }
  }
  return d.outcome();
}

Outcome live_smoke() {
  const char* key = std::getenv("BLINDBENCH_OPENAI_API_KEY");
  if (!key || !*key) return {Outcome::kSkip, "BLINDBENCH_OPENAI_API_KEY not set"};
  Detail d;
  if (!canonical_datasets().contains("delaney")) {
    d.check(false, "missing " + canonical_path("delaney").string());
    return d.outcome();
  }
  const char* model = std::getenv("BLINDBENCH_LIVE_MODEL");
  const auto dir = fixtures::temp_dir("acceptance-live");
  const std::string text =
      "[experiment]\ndatasets = [\"delaney\"]\nlevels = [\"zeroshot\"]\nshots = [0]\nruns = 1\n"
      "test_size_zeroshot = 20\ntemplates_dir = " + quoted(fixtures::template_dir()) +
      "\ndata_dir = " + quoted(data_dir()) + "\nresults_dir = \"results\"\n"
      "[[models]]\nid = \"" + std::string(model && *model ? model : "gpt-4.1-mini") +
      "\"\nprovider = \"openai\"\ntemperature = 0.7\ntop_p = 0.95\n";
  Experiment e(load_config_text(text, dir), nullptr);
  const auto run = e.plan().at(0);
  const auto rec = e.execute(run);
  d.check(rec.status == RunStatus::kDone, "status " + std::string(to_string(rec.status)) +
                                              (rec.error.empty() ? "" : " " + rec.error));
  const double rate = rec.summary.n_total
                          ? static_cast<double>(rec.summary.n_valid) / static_cast<double>(rec.summary.n_total)
                          : 0.0;
  d.check(rate >= 0.9, "parse success " + std::to_string(rec.summary.n_valid) + "/" +
                           std::to_string(rec.summary.n_total));
  try {
    const auto summary =
        nlohmann::json::parse(fixtures::read_file(e.run_dir(run) / run_files::kSummary));
    metrics_summary_from_json(summary.at("metrics"));
    d.check(summary.at("fingerprint") == run.fingerprint, "summary.json well-formed");
  } catch (const std::exception& ex) {
    d.check(false, std::string("summary.json: ") + ex.what());
  }
  fs::remove_all(dir);
  return d.outcome();
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> fn;
  };
  const std::vector<Criterion> criteria = {
      {"label-transform round-trip", label_round_trip},
      {"cipher soundness", cipher_soundness},
      {"synthetic discrimination", synthetic_discrimination},
      {"metrics oracle", metrics_oracle},
      {"vocabulary lint", vocabulary_lint},
      {"matrix accounting", matrix_accounting},
      {"dataset integrity", dataset_integrity},
      {"live smoke (optional)", live_smoke},
  };
  std::cout << "data dir: " << data_dir().string() << "\n";
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception& e) {
      o = {Outcome::kFail, std::string("exception: ") + e.what()};
    }
    const char* tag = o.status == Outcome::kPass ? "PASS" : o.status == Outcome::kFail ? "FAIL" : "SKIP";
    failures += o.status == Outcome::kFail;
    std::cout << tag << "  " << c.name << " [" << num(seconds_since(t0), 3) << " s]: " << o.detail
              << std::endl;
  }
  std::cout << (failures ? std::to_string(failures) + " criterion(s) failed" : "all criteria passed")
            << "\n";
  return failures ? 1 : 0;
}
