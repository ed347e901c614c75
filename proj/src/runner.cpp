#include "blindbench/runner.hpp"

#include <fnmatch.h>
#include <zlib.h>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_set>

#include "blindbench/error.hpp"
#include "blindbench/hash.hpp"
#include "blindbench/parse.hpp"
#include "blindbench/rng.hpp"

namespace blindbench {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Descriptors

std::string RunDescriptor::label() const {
  return model.model_id + "/" + dataset + "/" + level_dir(level) + "/" +
         std::to_string(shots) + "/" + std::to_string(run_index);
}

namespace {

json model_json(const ModelSpec& m) {
  json j = {{"id", m.model_id},
            {"provider", std::string(to_string(m.provider))},
            {"provider_name", m.provider_name},
            {"family", m.family},
            {"size", m.size},
            {"supports_sampling_params", m.supports_sampling_params},
            {"temperature", m.temperature ? json(*m.temperature) : json()},
            {"top_p", m.top_p ? json(*m.top_p) : json()},
            {"max_output_tokens", m.max_output_tokens ? json(*m.max_output_tokens) : json()},
            {"reasoning_effort", m.reasoning_effort ? json(*m.reasoning_effort) : json()}};
  if (m.synthetic) {
    const auto& s = *m.synthetic;
    j["synthetic"] = {{"kind", std::string(to_string(s.kind))},
                      {"seed", s.seed},
                      {"noise_scale", s.noise_scale},
                      {"intercept", s.prior_intercept},
                      {"slope", s.prior_slope},
                      {"fallback", s.fallback}};
  } else {
    j["synthetic"] = nullptr;
  }
  return j;
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

json to_json(const RunDescriptor& d) {
  return {{"model", model_json(d.model)},
          {"dataset", d.dataset},
          {"level", d.level == kZeroShotLevel ? json("zeroshot") : json(d.level)},
          {"shots", d.shots},
          {"run", d.run_index},
          {"test_size", d.test_size},
          {"split_seed", d.split_seed},
          {"shot_seed", d.shot_seed},
          {"run_seed", d.run_seed}};
}

std::vector<RunDescriptor> expand_matrix(const ExperimentConfig& cfg) {
  auto valid = [](int level, std::size_t shots) {
    return level == kZeroShotLevel ? shots == 0 : (shots == 60 || shots == 1000);
  };
  for (int level : cfg.levels) {
    if (std::none_of(cfg.shots.begin(), cfg.shots.end(),
                     [&](std::size_t s) { return valid(level, s); })) {
      throw ConfigError("level " + level_dir(level) + " has no valid shot count (" +
                        (level == kZeroShotLevel ? std::string("zeroshot needs 0")
                                                 : std::string("levels 1-6 need 60 or 1000")) +
                        ")");
    }
  }
  for (std::size_t shots : cfg.shots) {
    if (std::none_of(cfg.levels.begin(), cfg.levels.end(),
                     [&](int l) { return valid(l, shots); })) {
      throw ConfigError("shots=" + std::to_string(shots) + " has no valid level (" +
                        (shots == 0 ? std::string("0 shots pairs only with zeroshot")
                                    : std::string("zeroshot pairs only with 0 shots")) +
                        ")");
    }
  }

  std::vector<RunDescriptor> out;
  for (const auto& model : cfg.models) {
    for (const auto& ds : cfg.datasets) {
      for (int level : cfg.levels) {
        for (std::size_t shots : cfg.shots) {
          if (!valid(level, shots)) continue;
          for (int run = 0; run < cfg.runs; ++run) {
            RunDescriptor d;
            d.model = model;
            d.dataset = ds.name;
            d.level = level;
            d.shots = shots;
            d.run_index = run;
            d.test_size =
                level == kZeroShotLevel ? cfg.test_size_zeroshot : cfg.test_size_default;
            d.split_seed = cfg.split_seed;
            const std::string run_tag = cfg.freeze_shots ? "frozen" : std::to_string(run);
            d.shot_seed = derive_seed(cfg.split_seed, {ds.name, std::to_string(shots), run_tag});
            d.run_seed = derive_seed(cfg.split_seed, {model.model_id, ds.name, level_dir(level),
                                                      std::to_string(shots), std::to_string(run)});
            out.push_back(std::move(d));
          }
        }
      }
    }
  }
  return out;
}

std::uint64_t synthetic_run_seed(std::uint64_t backend_seed, int run_index) {
  return derive_seed(backend_seed, {"run", std::to_string(run_index)});
}

std::string fingerprint(const RunDescriptor& d, std::string_view template_version,
                        std::string_view cipher_hash) {
  json j = to_json(d);
  j["template_version"] = template_version;
  j["cipher_hash"] = cipher_hash;
  return sha256_hex(j.dump()).substr(0, 16);
}

std::string_view to_string(RunStatus s) {
  switch (s) {
    case RunStatus::kPending: return "pending";
    case RunStatus::kRunning: return "running";
    case RunStatus::kDone: return "done";
    case RunStatus::kFailed: return "failed";
  }
  return "pending";
}

RunStatus run_status_from_string(std::string_view s) {
  if (s == "running") return RunStatus::kRunning;
  if (s == "done") return RunStatus::kDone;
  if (s == "failed") return RunStatus::kFailed;
  return RunStatus::kPending;
}

// ---------------------------------------------------------------------------
// Files

void write_file_atomic(const fs::path& path, std::string_view contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

namespace {

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Complete lines only; a torn final line (no newline) is dropped.
std::vector<std::string> complete_lines(const std::string& text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  for (;;) {
    const auto nl = text.find('\n', pos);
    if (nl == std::string::npos) break;
    if (nl > pos) out.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  return out;
}

std::string gunzip_all(const fs::path& p) {
  std::string out;
  gzFile f = gzopen(p.string().c_str(), "rb");
  if (f == nullptr) throw Error("cannot open " + p.string());
  char buf[1 << 16];
  for (;;) {
    const int n = gzread(f, buf, sizeof buf);
    if (n <= 0) break;
    out.append(buf, static_cast<std::size_t>(n));
  }
  gzclose(f);
  return out;
}

void gz_write(const fs::path& p, const char* mode, std::string_view data) {
  gzFile f = gzopen(p.string().c_str(), mode);
  if (f == nullptr) throw Error("cannot open " + p.string());
  if (!data.empty() &&
      gzwrite(f, data.data(), static_cast<unsigned>(data.size())) !=
          static_cast<int>(data.size())) {
    gzclose(f);
    throw Error("cannot write " + p.string());
  }
  if (gzclose(f) != Z_OK) throw Error("cannot close " + p.string());
}

}  // namespace

std::vector<PredictionRecord> read_records(const fs::path& jsonl) {
  std::vector<PredictionRecord> out;
  if (!fs::exists(jsonl)) return out;
  for (const auto& line : complete_lines(read_text(jsonl))) {
    const auto j = json::parse(line, nullptr, false);
    if (j.is_discarded()) continue;
    out.push_back(prediction_record_from_json(j));
  }
  return out;
}

std::vector<json> read_transcript(const fs::path& gz) {
  std::vector<json> out;
  if (!fs::exists(gz)) return out;
  for (const auto& line : complete_lines(gunzip_all(gz))) {
    auto j = json::parse(line, nullptr, false);
    if (!j.is_discarded()) out.push_back(std::move(j));
  }
  return out;
}

void write_experiment_manifest(const fs::path& results_dir, const fs::path& config_path) {
  fs::create_directories(results_dir);
  const auto abs = fs::absolute(config_path);
  json j = {{"config_path", abs.string()}, {"config_text", read_text(abs)}};
  write_file_atomic(results_dir / run_files::kManifest, j.dump(2) + "\n");
}

ExperimentConfig load_experiment_manifest(const fs::path& results_dir) {
  const auto p = results_dir / run_files::kManifest;
  if (!fs::exists(p)) throw ConfigError("no " + p.string() + "; not a results directory");
  const auto j = json::parse(read_text(p), nullptr, false);
  if (j.is_discarded() || !j.contains("config_text") || !j.contains("config_path")) {
    throw ConfigError("malformed " + p.string());
  }
  const fs::path cfg_path = j["config_path"].get<std::string>();
  auto cfg = load_config_text(j["config_text"].get<std::string>(), cfg_path.parent_path());
  cfg.results_dir = fs::absolute(results_dir);
  return cfg;
}

// ---------------------------------------------------------------------------
// Experiment

Experiment::Experiment(ExperimentConfig cfg, std::shared_ptr<ChatClient> client)
    : cfg_(std::move(cfg)),
      client_(client ? std::move(client) : std::make_shared<ChatClient>(cfg_.providers)),
      templates_(TemplateStore::load(cfg_.templates_dir)) {}

Experiment::DatasetState& Experiment::state(const std::string& name) {
  std::lock_guard lock(mu_);
  auto& slot = datasets_[name];
  if (slot) return *slot;
  const auto it = std::find_if(cfg_.datasets.begin(), cfg_.datasets.end(),
                               [&](const DatasetConfig& d) { return d.name == name; });
  if (it == cfg_.datasets.end()) throw ConfigError("dataset '" + name + "' is not configured");
  auto st = std::make_unique<DatasetState>();
  st->data = load_dataset(it->path, name, it->mapping);
  auto lookup = std::make_shared<std::unordered_map<std::string, std::string>>();
  for (const auto& r : st->data.records) lookup->emplace(r.smiles, r.label_text);
  st->lookup = std::move(lookup);
  slot = std::move(st);
  return *slot;
}

const Dataset& Experiment::dataset(const std::string& name) { return state(name).data; }

const SmilesCipher& Experiment::cipher(const std::string& name) {
  auto& st = state(name);
  std::lock_guard lock(mu_);
  if (!st.cipher) {
    const auto corpus = st.data.smiles();
    st.cipher = SmilesCipher::build(collect_vocabulary(corpus),
                                    derive_seed(cfg_.cipher_seed, {name}));
  }
  return *st.cipher;
}

std::vector<PlannedRun> Experiment::plan(const std::string& only) {
  const auto version = templates_.version();
  std::vector<PlannedRun> out;
  for (auto& d : expand_matrix(cfg_)) {
    std::string cipher_hash;
    if (d.level != kZeroShotLevel && BlindingLevel::from_number(d.level).input_transformed) {
      cipher_hash = cipher(d.dataset).table_hash();
    }
    auto fp = fingerprint(d, version, cipher_hash);
    if (!only.empty() && fnmatch(only.c_str(), fp.c_str(), 0) != 0) continue;
    out.push_back({std::move(d), std::move(fp)});
  }
  return out;
}

fs::path Experiment::run_dir(const PlannedRun& run) const {
  return cfg_.results_dir / run.fingerprint;
}

namespace {

struct Systemic {
  std::string message;
};

json run_json(const RunRecord& r, const PlannedRun& run, std::size_t completed) {
  return {{"fingerprint", run.fingerprint},
          {"label", run.descriptor.label()},
          {"status", std::string(to_string(r.status))},
          {"started_at", r.started_at},
          {"finished_at", r.finished_at.empty() ? json() : json(r.finished_at)},
          {"completed", completed},
          {"error", r.error.empty() ? json() : json(r.error)}};
}

}  // namespace

RunRecord Experiment::execute(const PlannedRun& run, const ExecuteHooks& hooks) {
  const auto& d = run.descriptor;
  const auto dir = run_dir(run);
  fs::create_directories(dir);
  const auto run_path = dir / run_files::kRun;

  RunRecord result;
  result.fingerprint = run.fingerprint;

  if (fs::exists(run_path)) {
    const auto prev = json::parse(read_text(run_path), nullptr, false);
    if (!prev.is_discarded() && prev.value("status", "") == "done") {
      result.status = RunStatus::kDone;
      result.started_at = prev.value("started_at", "");
      result.finished_at = prev.value("finished_at", "");
      result.records = read_records(dir / run_files::kRecords);
      result.summary = metrics_summary_from_json(
          json::parse(read_text(dir / run_files::kSummary))["metrics"]);
      return result;
    }
    if (!prev.is_discarded()) result.started_at = prev.value("started_at", "");
  }
  if (result.started_at.empty()) result.started_at = utc_now();
  result.status = RunStatus::kRunning;

  auto& st = state(d.dataset);
  const Dataset& data = st.data;
  const bool zero_shot = d.level == kZeroShotLevel;
  const BlindingLevel level = zero_shot ? BlindingLevel::from_number(1)
                                        : BlindingLevel::from_number(d.level);
  const bool label_tf = !zero_shot && level.label_transformed;
  const bool input_tf = !zero_shot && level.input_transformed;
  const SmilesCipher* cph = input_tf ? &cipher(d.dataset) : nullptr;

  const Split split = make_split(data, d.split_seed, d.test_size);
  std::vector<double> fit_labels;
  if (cfg_.label_fit == LabelFit::kTrainOnly) {
    for (auto id : split.train_ids) fit_labels.push_back(data.records[id].label);
  } else {
    fit_labels = data.labels();
  }
  const auto transform = LabelTransform::fit(
      fit_labels, cfg_.label_fit == LabelFit::kTrainOnly ? "train" : "full");

  // Extra candidates replace shots whose SMILES equals the test SMILES.
  std::vector<MoleculeId> shot_pool;
  if (d.shots > 0) {
    const auto want = std::min(split.train_ids.size(), d.shots + 64);
    shot_pool = sample_shots(split, want, d.shot_seed);
    if (shot_pool.size() < d.shots) throw SizeError("not enough training molecules");
  }
  const std::unordered_set<MoleculeId> train_set(split.train_ids.begin(), split.train_ids.end());

  ModelSpec model = d.model;
  if (model.synthetic) {
    model.synthetic->seed = synthetic_run_seed(model.synthetic->seed, d.run_index);
    model.synthetic->lookup = st.lookup;
  }

  write_file_atomic(dir / run_files::kDescriptor, to_json(d).dump(2) + "\n");

  // Resume state.
  std::map<MoleculeId, PredictionRecord> done;
  for (auto& r : read_records(dir / run_files::kRecordsPartial)) done[r.molecule_id] = r;
  std::map<MoleculeId, json> transcripts;
  for (auto& t : read_transcript(dir / run_files::kTranscriptPartial)) {
    const auto id = t.value("molecule_id", MoleculeId{0});
    if (done.contains(id)) transcripts[id] = std::move(t);
  }
  // Rewrite partial files so torn tails and orphan transcripts are dropped.
  {
    std::string recs;
    for (const auto& [id, r] : done) recs += to_json(r).dump() + "\n";
    write_file_atomic(dir / run_files::kRecordsPartial, recs);
    std::string tr;
    for (const auto& [id, t] : transcripts) tr += t.dump() + "\n";
    const auto tmp = fs::path(dir / run_files::kTranscriptPartial).concat(".tmp");
    gz_write(tmp, "wb", tr);
    fs::rename(tmp, dir / run_files::kTranscriptPartial);
  }
  write_file_atomic(run_path, run_json(result, run, done.size()).dump(2) + "\n");

  std::vector<MoleculeId> todo;
  for (auto id : split.test_ids) {
    if (!done.contains(id)) todo.push_back(id);
  }

  std::mutex write_mu;
  std::ofstream partial(dir / run_files::kRecordsPartial, std::ios::binary | std::ios::app);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::atomic<std::size_t> queried{0};
  std::optional<Systemic> systemic;
  PromptRenderer renderer(templates_);

  auto process = [&](MoleculeId id) {
    const auto& mol = data.records[id];
    PredictionRecord rec;
    rec.molecule_id = id;
    rec.run_index = d.run_index;
    rec.truth_original_scale = mol.label;
    rec.truth_prompt_scale = label_tf ? transform.apply(mol.label) : mol.label;
    rec.truth_text = mol.label_text;
    rec.label_transformed = label_tf;

    PromptBundle bundle;
    if (zero_shot) {
      bundle = renderer.render_zero_shot(d.dataset, mol.smiles, id);
    } else {
      std::vector<ShotExample> shots;
      for (auto sid : shot_pool) {
        if (shots.size() == d.shots) break;
        const auto& s = data.records[sid];
        if (!train_set.contains(sid)) throw Systemic{"shot drawn outside the train split"};
        if (s.smiles == mol.smiles) continue;
        shots.push_back({s.display_name(), cph ? cph->encipher(s.smiles) : s.smiles,
                         label_tf ? transform.apply(s.label) : s.label});
      }
      if (shots.size() < d.shots) throw Systemic{"not enough non-colliding shots"};
      const TestItem test{mol.display_name(), cph ? cph->encipher(mol.smiles) : mol.smiles};
      bundle = renderer.render_level(level, d.dataset, shots, test, id);
    }

    json tr = {{"molecule_id", id},
               {"run_index", d.run_index},
               {"bundle", to_json(bundle)},
               {"analysis", nullptr},
               {"prediction", nullptr},
               {"error", nullptr}};
    queried.fetch_add(1);
    try {
      auto res = run_two_phase(*client_, model, bundle);
      if (res.analysis) tr["analysis"] = to_json(*res.analysis);
      tr["prediction"] = to_json(res.prediction);
      rec.raw_text = res.prediction.response;
      if (auto p = try_parse_prediction(rec.raw_text)) {
        rec.parsed = *p;
        rec.value_original_scale = label_tf ? transform.invert(p->value) : p->value;
        rec.valid = true;
      } else {
        rec.error = "parse failure";
      }
    } catch (const CredentialError& e) {
      throw Systemic{std::string("credential error: ") + e.what()};
    } catch (const PredictionPhaseError& e) {
      tr["analysis"] = to_json(e.analysis());
      try {
        std::rethrow_exception(e.cause());
      } catch (const CredentialError& c) {
        throw Systemic{std::string("credential error: ") + c.what()};
      } catch (const std::exception& c) {
        rec.error = c.what();
      }
    } catch (const Error& e) {
      rec.error = e.what();
    }
    if (!rec.error.empty()) tr["error"] = rec.error;

    std::lock_guard lock(write_mu);
    gz_write(dir / run_files::kTranscriptPartial, "ab", tr.dump() + "\n");
    partial << to_json(rec).dump() << '\n';
    partial.flush();
    done[id] = std::move(rec);
  };

  auto worker = [&] {
    for (;;) {
      if (abort.load() || (hooks.stop && hooks.stop->load())) return;
      const auto i = next.fetch_add(1);
      if (i >= todo.size()) return;
      const auto id = todo[i];
      try {
        if (hooks.on_molecule_start) hooks.on_molecule_start(id);
        if (hooks.stop && hooks.stop->load()) return;
        process(id);
      } catch (const Systemic& s) {
        std::lock_guard lock(write_mu);
        if (!systemic) systemic = s;
        abort = true;
      } catch (const std::exception& e) {
        std::lock_guard lock(write_mu);
        if (!systemic) systemic = Systemic{e.what()};
        abort = true;
      }
    }
  };

  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(cfg_.concurrency),
                                             std::max<std::size_t>(todo.size(), 1));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  partial.close();
  result.queried = queried.load();

  if (systemic) {
    result.status = RunStatus::kFailed;
    result.error = systemic->message;
    result.finished_at = utc_now();
    write_file_atomic(run_path, run_json(result, run, done.size()).dump(2) + "\n");
    return result;
  }
  if (done.size() < split.test_ids.size()) {
    write_file_atomic(run_path, run_json(result, run, done.size()).dump(2) + "\n");
    return result;
  }

  // Finalize in test order.
  std::map<MoleculeId, json> final_tr;
  for (auto& t : read_transcript(dir / run_files::kTranscriptPartial)) {
    const auto id = t.value("molecule_id", MoleculeId{0});
    final_tr[id] = std::move(t);
  }
  std::string recs;
  std::string tr;
  for (auto id : split.test_ids) {
    result.records.push_back(done.at(id));
    recs += to_json(done.at(id)).dump() + "\n";
    if (auto it = final_tr.find(id); it != final_tr.end()) tr += it->second.dump() + "\n";
  }
  result.summary = summarize(result.records);

  json summary = {{"fingerprint", run.fingerprint},
                  {"descriptor", to_json(d)},
                  {"label_transform",
                   {{"neg_min", transform.neg_min()},
                    {"neg_max", transform.neg_max()},
                    {"fitted_on", transform.fitted_on()}}},
                  {"template_version", templates_.version()},
                  {"cipher_hash", cph ? json(cph->table_hash()) : json()},
                  {"metrics", to_json(result.summary)}};

  write_file_atomic(dir / run_files::kRecords, recs);
  write_file_atomic(dir / run_files::kSummary, summary.dump(2) + "\n");
  {
    const auto tmp = fs::path(dir / run_files::kTranscript).concat(".tmp");
    gz_write(tmp, "wb", tr);
    fs::rename(tmp, dir / run_files::kTranscript);
  }
  if (cph) {
    std::ostringstream ss;
    cph->write_csv(ss);
    write_file_atomic(dir / run_files::kCipher, ss.str());
  }
  result.status = RunStatus::kDone;
  result.finished_at = utc_now();
  write_file_atomic(run_path, run_json(result, run, done.size()).dump(2) + "\n");
  fs::remove(dir / run_files::kRecordsPartial);
  fs::remove(dir / run_files::kTranscriptPartial);
  return result;
}

std::vector<RunRecord> Experiment::execute_all(const std::vector<PlannedRun>& runs,
                                               const ExecuteHooks& hooks) {
  std::vector<RunRecord> out(runs.size());
  const auto n = std::min<std::size_t>(static_cast<std::size_t>(cfg_.run_concurrency),
                                       std::max<std::size_t>(runs.size(), 1));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      if (hooks.stop && hooks.stop->load()) return;
      const auto i = next.fetch_add(1);
      if (i >= runs.size()) return;
      out[i] = execute(runs[i], hooks);
    }
  };
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return out;
}

}  // namespace blindbench
