#include "blindbench/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "blindbench/error.hpp"
#include "blindbench/toml.hpp"

namespace blindbench {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

template <typename T>
T get_or(const json& t, const char* key, T fallback, const std::string& where) {
  if (!t.contains(key)) return fallback;
  try {
    return t.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

std::uint64_t get_seed(const json& t, const char* key, std::uint64_t fallback,
                       const std::string& where) {
  if (!t.contains(key)) return fallback;
  const auto& v = t.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ConfigError(where + "." + key + " must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

std::optional<double> get_opt_double(const json& t, const char* key, const std::string& where) {
  if (!t.contains(key)) return std::nullopt;
  if (!t.at(key).is_number()) throw ConfigError(where + "." + key + " must be a number");
  return t.at(key).get<double>();
}

const json& table(const json& doc, const char* key) {
  static const json empty = json::object();
  if (!doc.contains(key)) return empty;
  if (!doc.at(key).is_object()) throw ConfigError("[" + std::string(key) + "] must be a table");
  return doc.at(key);
}

int parse_level(const json& v) {
  if (v.is_string()) {
    if (v.get<std::string>() == "zeroshot") return kZeroShotLevel;
    throw ConfigError("unknown level '" + v.get<std::string>() + "'");
  }
  if (v.is_number_integer()) {
    const int l = v.get<int>();
    if (l >= 1 && l <= 6) return l;
  }
  throw ConfigError("level must be \"zeroshot\" or 1..6, got " + v.dump());
}

ProviderConfig parse_provider(const std::string& name, const json& t, ProviderConfig cfg) {
  const std::string where = "providers." + name;
  cfg.name = name;
  cfg.base_url = get_or<std::string>(t, "base_url", cfg.base_url, where);
  cfg.endpoint_path = get_or<std::string>(t, "endpoint_path", cfg.endpoint_path, where);
  cfg.api_key_env = get_or<std::string>(t, "api_key_env", cfg.api_key_env, where);
  cfg.base_url_env = get_or<std::string>(t, "base_url_env", cfg.base_url_env, where);
  cfg.auth_header = get_or<std::string>(t, "auth_header", cfg.auth_header, where);
  cfg.auth_prefix = get_or<std::string>(t, "auth_prefix", cfg.auth_prefix, where);
  cfg.requests_per_minute = get_or<int>(t, "requests_per_minute", cfg.requests_per_minute, where);
  cfg.timeout = std::chrono::seconds(
      get_or<long long>(t, "timeout_s", cfg.timeout.count(), where));
  cfg.retry.max_attempts = get_or<int>(t, "max_attempts", cfg.retry.max_attempts, where);
  cfg.retry.initial_delay = std::chrono::milliseconds(
      get_or<long long>(t, "initial_delay_ms", cfg.retry.initial_delay.count(), where));
  cfg.retry.max_delay = std::chrono::milliseconds(
      get_or<long long>(t, "max_delay_ms", cfg.retry.max_delay.count(), where));
  cfg.retry.backoff_factor = get_or<double>(t, "backoff_factor", cfg.retry.backoff_factor, where);
  cfg.retry.jitter = get_or<double>(t, "jitter", cfg.retry.jitter, where);
  if (t.contains("headers")) {
    if (!t["headers"].is_object()) throw ConfigError(where + ".headers must be a table");
    for (const auto& [k, v] : t["headers"].items()) {
      if (!v.is_string()) throw ConfigError(where + ".headers." + k + " must be a string");
      cfg.extra_headers[k] = v.get<std::string>();
    }
  }
  if (cfg.base_url.empty() && cfg.base_url_env.empty()) {
    throw ConfigError(where + " needs base_url or base_url_env");
  }
  return cfg;
}

ModelSpec parse_model(const json& t, std::size_t index) {
  const std::string where = "models[" + std::to_string(index) + "]";
  if (!t.is_object()) throw ConfigError(where + " must be a table");
  ModelSpec m;
  m.model_id = get_or<std::string>(t, "id", "", where);
  if (m.model_id.empty()) throw ConfigError(where + ".id is required");
  const auto provider = get_or<std::string>(t, "provider", "synthetic", where);
  if (auto p = provider_from_string(provider)) {
    m.provider = *p;
  } else {
    // Any other name refers to a [providers.<name>] entry speaking the
    // OpenAI dialect.
    m.provider = Provider::kOpenAICompatible;
    m.provider_name = provider;
  }
  m.provider_name = get_or<std::string>(t, "provider_name", m.provider_name, where);
  m.temperature = get_opt_double(t, "temperature", where);
  m.top_p = get_opt_double(t, "top_p", where);
  m.supports_sampling_params =
      get_or<bool>(t, "supports_sampling_params", m.supports_sampling_params, where);
  if (t.contains("max_output_tokens")) {
    m.max_output_tokens = get_or<int>(t, "max_output_tokens", 0, where);
  }
  if (t.contains("reasoning_effort")) {
    m.reasoning_effort = get_or<std::string>(t, "reasoning_effort", "", where);
  }
  m.family = get_or<std::string>(t, "family", m.model_id, where);
  m.size = get_or<std::string>(t, "size", "", where);

  if (m.provider == Provider::kSynthetic) {
    const json s = t.contains("synthetic") ? t["synthetic"] : json::object();
    const std::string sw = where + ".synthetic";
    SyntheticBackendSpec spec;
    const auto kind = get_or<std::string>(s, "kind", "", sw);
    auto k = synthetic_kind_from_string(kind);
    if (!k) throw ConfigError(sw + ".kind must be memorizer, prior-model, icl-regressor or silent");
    spec.kind = *k;
    spec.seed = get_seed(s, "seed", 0, sw);
    spec.noise_scale = get_or<double>(s, "noise_scale", 0.0, sw);
    spec.prior_intercept = get_or<double>(s, "intercept", 0.0, sw);
    spec.prior_slope = get_or<double>(s, "slope", 0.0, sw);
    spec.fallback = get_or<std::string>(s, "fallback", spec.fallback, sw);
    m.synthetic = spec;
  } else if (t.contains("synthetic")) {
    throw ConfigError(where + ": synthetic backend on a live provider");
  }
  return m;
}

}  // namespace

ExperimentConfig config_from_toml(const json& doc, const fs::path& base_dir) {
  ExperimentConfig cfg;
  const auto& exp = table(doc, "experiment");
  const std::string ew = "experiment";

  if (!exp.contains("levels") || !exp["levels"].is_array() || exp["levels"].empty()) {
    throw ConfigError("experiment.levels must be a non-empty array");
  }
  for (const auto& l : exp["levels"]) cfg.levels.push_back(parse_level(l));
  if (!exp.contains("shots") || !exp["shots"].is_array() || exp["shots"].empty()) {
    throw ConfigError("experiment.shots must be a non-empty array");
  }
  for (const auto& s : exp["shots"]) {
    if (!s.is_number_integer() || s.get<long long>() < 0) {
      throw ConfigError("experiment.shots entries must be non-negative integers");
    }
    const auto k = s.get<std::size_t>();
    if (k != 0 && k != 60 && k != 1000) {
      throw ConfigError("experiment.shots entries must be 0, 60 or 1000, got " +
                        std::to_string(k));
    }
    cfg.shots.push_back(k);
  }
  cfg.runs = get_or<int>(exp, "runs", cfg.runs, ew);
  if (cfg.runs < 1) throw ConfigError("experiment.runs must be positive");
  cfg.split_seed = get_seed(exp, "split_seed", cfg.split_seed, ew);
  cfg.cipher_seed = get_seed(exp, "cipher_seed", cfg.cipher_seed, ew);
  cfg.test_size_default = get_or<std::size_t>(exp, "test_size", cfg.test_size_default, ew);
  cfg.test_size_zeroshot =
      get_or<std::size_t>(exp, "test_size_zeroshot", cfg.test_size_zeroshot, ew);
  cfg.concurrency = get_or<int>(exp, "concurrency", cfg.concurrency, ew);
  cfg.run_concurrency = get_or<int>(exp, "run_concurrency", cfg.run_concurrency, ew);
  if (cfg.concurrency < 1 || cfg.run_concurrency < 1) {
    throw ConfigError("experiment concurrency values must be positive");
  }
  cfg.freeze_shots = get_or<bool>(exp, "freeze_shots", cfg.freeze_shots, ew);
  const auto fit = get_or<std::string>(exp, "label_fit", "full", ew);
  if (fit == "full") {
    cfg.label_fit = LabelFit::kFullDataset;
  } else if (fit == "train") {
    cfg.label_fit = LabelFit::kTrainOnly;
  } else {
    throw ConfigError("experiment.label_fit must be \"full\" or \"train\"");
  }
  cfg.templates_dir = resolve(base_dir, get_or<std::string>(exp, "templates_dir", "templates", ew));
  cfg.results_dir = resolve(base_dir, get_or<std::string>(exp, "results_dir", "results", ew));
  const auto data_dir = resolve(base_dir, get_or<std::string>(exp, "data_dir", "data", ew));

  const auto& ds = table(doc, "datasets");
  std::vector<std::string> names;
  if (exp.contains("datasets")) {
    names = get_or<std::vector<std::string>>(exp, "datasets", {}, ew);
  } else {
    for (const auto& [k, v] : ds.items()) names.push_back(k);
  }
  if (names.empty()) throw ConfigError("no datasets configured");
  std::set<std::string> seen;
  for (const auto& name : names) {
    if (!seen.insert(name).second) throw ConfigError("dataset '" + name + "' listed twice");
    const std::string dw = "datasets." + name;
    const json t = ds.contains(name) ? ds.at(name) : json::object();
    ColumnMapping m;
    if (canonical_size(name)) m = default_mapping(name);
    m.smiles_column = get_or<std::string>(t, "smiles_column", m.smiles_column, dw);
    m.label_column = get_or<std::string>(t, "label_column", m.label_column, dw);
    if (t.contains("name_column")) {
      const auto nc = get_or<std::string>(t, "name_column", "", dw);
      m.name_column = nc.empty() ? std::nullopt : std::optional<std::string>(nc);
    }
    m.unit = get_or<std::string>(t, "unit", m.unit, dw);
    if (m.smiles_column.empty() || m.label_column.empty()) {
      throw ConfigError(dw + " needs smiles_column and label_column");
    }
    DatasetConfig d;
    d.name = name;
    d.mapping = m;
    const auto path = get_or<std::string>(t, "path", m.default_file, dw);
    if (path.empty()) throw ConfigError(dw + ".path is required");
    d.path = resolve(data_dir, path);
    cfg.datasets.push_back(std::move(d));
  }

  cfg.providers = default_providers();
  for (const auto& [name, t] : table(doc, "providers").items()) {
    const auto it = cfg.providers.find(name);
    cfg.providers[name] =
        parse_provider(name, t, it != cfg.providers.end() ? it->second : ProviderConfig{});
  }

  if (!doc.contains("models") || !doc["models"].is_array() || doc["models"].empty()) {
    throw ConfigError("at least one [[models]] entry is required");
  }
  std::set<std::string> ids;
  for (std::size_t i = 0; i < doc["models"].size(); ++i) {
    auto m = parse_model(doc["models"][i], i);
    if (!ids.insert(m.model_id).second) {
      throw ConfigError("model id '" + m.model_id + "' listed twice");
    }
    if (m.provider != Provider::kSynthetic) {
      const auto pname = m.provider_name.empty() ? std::string(to_string(m.provider))
                                                 : m.provider_name;
      if (!cfg.providers.contains(pname)) {
        throw ConfigError("model '" + m.model_id + "' uses unknown provider '" + pname + "'");
      }
    }
    cfg.models.push_back(std::move(m));
  }
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  return config_from_toml(toml::parse_file(path), fs::absolute(path).parent_path());
}

ExperimentConfig load_config_text(const std::string& text, const fs::path& base_dir) {
  return config_from_toml(toml::parse(text), base_dir);
}

}  // namespace blindbench
