#include "blindbench/promptgen.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "blindbench/error.hpp"
#include "blindbench/hash.hpp"
#include "blindbench/text.hpp"
#include "blindbench/transform.hpp"

namespace blindbench {

std::string_view to_string(ContextTier tier) {
  switch (tier) {
    case ContextTier::kSpecific:
      return "specific";
    case ContextTier::kGeneric:
      return "generic";
    case ContextTier::kAgnostic:
      return "agnostic";
  }
  return "unknown";
}

const std::vector<BlindingLevel>& BlindingLevel::all() {
  static const std::vector<BlindingLevel> levels{
      {1, ContextTier::kSpecific, false, false},
      {2, ContextTier::kSpecific, true, false},
      {3, ContextTier::kGeneric, false, false},
      {4, ContextTier::kGeneric, true, false},
      {5, ContextTier::kAgnostic, false, true},
      {6, ContextTier::kAgnostic, true, true},
  };
  return levels;
}

BlindingLevel BlindingLevel::from_number(int level) {
  if (level < 1 || level > 6) {
    throw std::out_of_range("blinding level must be 1..6, got " +
                            std::to_string(level));
  }
  return all()[static_cast<std::size_t>(level - 1)];
}

std::string level_dir(int level) {
  return level == 0 ? "zeroshot" : std::to_string(level);
}

nlohmann::json to_json(const PromptBundle& b) {
  auto opt = [](const std::optional<std::string>& s) {
    return s ? nlohmann::json(*s) : nlohmann::json();
  };
  return {{"meta",
           {{"dataset", b.meta.dataset},
            {"level", b.meta.level},
            {"shots", b.meta.shots},
            {"molecule_id", b.meta.molecule_id}}},
          {"system", b.system},
          {"sample_list", opt(b.sample_list)},
          {"analysis", opt(b.analysis)},
          {"prediction", b.prediction}};
}

// ---------------------------------------------------------------------------
// Templates

namespace {

const std::set<std::string, std::less<>>& known_placeholders() {
  static const std::set<std::string, std::less<>> keys{
      "smiles", "names", "inputs", "values", "test_name", "test_input", "rows"};
  return keys;
}

struct Placeholder {
  std::size_t begin;
  std::size_t end;
  std::string key;
};

std::vector<Placeholder> find_placeholders(std::string_view tmpl) {
  std::vector<Placeholder> out;
  for (std::size_t pos = tmpl.find("{{"); pos != std::string_view::npos;
       pos = tmpl.find("{{", pos)) {
    const auto close = tmpl.find("}}", pos + 2);
    if (close == std::string_view::npos) {
      throw TemplateError("unterminated placeholder at offset " + std::to_string(pos));
    }
    out.push_back({pos, close + 2, std::string(trim(tmpl.substr(pos + 2, close - pos - 2)))});
    pos = close + 2;
  }
  return out;
}

}  // namespace

std::string fill_template(std::string_view tmpl,
                          const std::map<std::string, std::string>& values) {
  std::string out;
  std::size_t last = 0;
  for (const auto& ph : find_placeholders(tmpl)) {
    const auto it = values.find(ph.key);
    if (it == values.end()) {
      throw TemplateError("unknown placeholder {{" + ph.key + "}}");
    }
    out.append(tmpl.substr(last, ph.begin - last));
    out += it->second;
    last = ph.end;
  }
  out.append(tmpl.substr(last));
  return out;
}

TemplateStore TemplateStore::load(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) {
    throw TemplateMissingError("template directory " + root.string() +
                               " does not exist");
  }
  std::map<std::string, std::string> templates;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
    const auto rel = fs::relative(entry.path(), root);
    std::vector<std::string> parts;
    for (const auto& p : rel) parts.push_back(p.string());
    if (parts.size() != 3) continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::ostringstream body;
    body << in.rdbuf();
    auto text = body.str();
    // Files end with a newline; the template itself does not.
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) {
      text.pop_back();
    }
    templates.emplace(parts[0] + "/" + parts[1] + "/" +
                          fs::path(parts[2]).stem().string(),
                      std::move(text));
  }
  return from_map(std::move(templates));
}

TemplateStore TemplateStore::from_map(std::map<std::string, std::string> templates) {
  TemplateStore store;
  for (auto& [k, v] : templates) store.templates_.emplace(k, std::move(v));
  return store;
}

const std::string& TemplateStore::get(std::string_view dataset,
                                      std::string_view level_dir,
                                      std::string_view part) const {
  std::string key = std::string(dataset) + "/" + std::string(level_dir) + "/" +
                    std::string(part);
  const auto it = templates_.find(key);
  if (it == templates_.end()) {
    throw TemplateMissingError("no template " + key);
  }
  return it->second;
}

bool TemplateStore::contains(std::string_view dataset, std::string_view level_dir,
                             std::string_view part) const {
  return templates_.contains(std::string(dataset) + "/" + std::string(level_dir) +
                             "/" + std::string(part));
}

std::vector<std::string> TemplateStore::datasets() const {
  std::set<std::string> names;
  for (const auto& [key, body] : templates_) names.insert(key.substr(0, key.find('/')));
  return {names.begin(), names.end()};
}

std::string TemplateStore::version() const {
  std::string all;
  for (const auto& [key, body] : templates_) {
    all += key;
    all += '\0';
    all += body;
    all += '\0';
  }
  return sha256_hex(all);
}

// ---------------------------------------------------------------------------
// Vocabulary lint

namespace {

const std::vector<std::string>& property_terms() {
  static const std::vector<std::string> terms{
      "solubility", "soluble",   "lipophilicity", "lipophilic", "logd",
      "octanol",    "atomization", "energetics",  "energy",     "energies",
      "hydrophilic", "hydrophobic", "delaney",    "esol",       "qm7",
      "mol/l",      "kcal/mol"};
  return terms;
}

const std::vector<std::string>& chemistry_terms() {
  static const std::vector<std::string> terms{
      "molecule", "molecular", "smiles",  "chemist",  "chemistry",
      "chemical", "compound",  "iupac",   "functional group",
      "organic",  "atom",      "water",   "bond"};
  return terms;
}

// Exact property wording a label-transformed specific level must avoid: the
// transformed values no longer carry that property's scale.
std::vector<std::string> exact_property_terms(std::string_view dataset) {
  if (dataset == "delaney") return {"log solubility", "mol/l"};
  if (dataset == "lipophilicity") return {"logd"};
  if (dataset == "qm7") return {"atomization energ", "kcal/mol"};
  return {};
}

}  // namespace

std::vector<std::string> banned_terms(const BlindingLevel& level,
                                      std::string_view dataset) {
  std::vector<std::string> out;
  switch (level.tier) {
    case ContextTier::kSpecific:
      if (level.label_transformed) out = exact_property_terms(dataset);
      break;
    case ContextTier::kGeneric:
      out = property_terms();
      break;
    case ContextTier::kAgnostic:
      out = property_terms();
      out.insert(out.end(), chemistry_terms().begin(), chemistry_terms().end());
      break;
  }
  return out;
}

void lint_bundle(const PromptBundle& bundle, const BlindingLevel& level,
                 std::span<const std::string> input_strings) {
  const auto terms = banned_terms(level, bundle.meta.dataset);
  auto check = [&](const std::string& text, const char* part) {
    const auto lower = to_lower(text);
    for (const auto& term : terms) {
      if (lower.find(term) != std::string::npos) throw VocabularyLeakError(term, part);
    }
  };
  check(bundle.system, "system");
  if (bundle.sample_list) check(*bundle.sample_list, "sample_list");
  if (bundle.analysis) check(*bundle.analysis, "analysis");
  check(bundle.prediction, "prediction");

  if (level.input_transformed) {
    for (const auto& s : input_strings) {
      for (char c : s) {
        if (is_smiles_character(c)) {
          throw VocabularyLeakError(std::string(1, c), "input string '" + s + "'");
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

}  // namespace

PromptBundle PromptRenderer::render_zero_shot(const std::string& dataset,
                                              std::string_view smiles,
                                              MoleculeId molecule_id) const {
  if (smiles.empty()) throw std::invalid_argument("empty SMILES for zero-shot prompt");
  PromptBundle b;
  b.system = fill_template(store_->get(dataset, "zeroshot", "system"), {});
  b.prediction = fill_template(store_->get(dataset, "zeroshot", "prediction"),
                               {{"smiles", std::string(smiles)}});
  b.meta = {dataset, 0, 0, molecule_id};
  return b;
}

std::string PromptRenderer::render_sample_list(
    const BlindingLevel& level, const std::string& dataset,
    std::span<const ShotExample> overflow) const {
  if (overflow.empty()) return {};
  std::string rows;
  for (const auto& shot : overflow) {
    if (!rows.empty()) rows += '\n';
    if (level.tier != ContextTier::kAgnostic) {
      rows += shot.name;
      rows += kSampleListSeparator;
    }
    rows += shot.input;
    rows += kSampleListSeparator;
    rows += format_prompt_value(shot.value);
  }
  return fill_template(store_->get(dataset, level_dir(level.level), "sample_list"),
                       {{"rows", rows}});
}

std::string PromptRenderer::render_prediction_guide(const BlindingLevel& level,
                                                    const std::string& dataset,
                                                    const TestItem& test) const {
  return fill_template(store_->get(dataset, level_dir(level.level), "prediction"),
                       {{"test_name", test.name}, {"test_input", test.input}});
}

PromptBundle PromptRenderer::render_level(const BlindingLevel& level,
                                          const std::string& dataset,
                                          std::span<const ShotExample> shots,
                                          const TestItem& test,
                                          MoleculeId molecule_id) const {
  for (const auto& shot : shots) {
    if (shot.input == test.input) {
      throw LeakageError("test input '" + test.input + "' appears among the shots");
    }
  }
  const std::size_t in_analysis = std::min(shots.size(), kAnalysisShotLimit);
  std::vector<std::string> names;
  std::vector<std::string> inputs;
  std::vector<std::string> values;
  for (std::size_t i = 0; i < in_analysis; ++i) {
    names.push_back(shots[i].name);
    inputs.push_back(shots[i].input);
    values.push_back(format_prompt_value(shots[i].value));
  }
  const auto dir = level_dir(level.level);

  PromptBundle b;
  b.system = fill_template(store_->get(dataset, dir, "system"), {});
  b.analysis = fill_template(store_->get(dataset, dir, "analysis"),
                             {{"names", join(names, ", ")},
                              {"inputs", join(inputs, ", ")},
                              {"values", join(values, ", ")}});
  if (shots.size() > kAnalysisShotLimit) {
    b.sample_list = render_sample_list(level, dataset, shots.subspan(in_analysis));
  }
  b.prediction = render_prediction_guide(level, dataset, test);
  b.meta = {dataset, level.level, shots.size(), molecule_id};

  std::vector<std::string> all_inputs;
  all_inputs.reserve(shots.size() + 1);
  for (const auto& shot : shots) all_inputs.push_back(shot.input);
  all_inputs.push_back(test.input);
  lint_bundle(b, level, all_inputs);
  return b;
}

// ---------------------------------------------------------------------------
// Validation

std::vector<std::string> validate_templates(const TemplateStore& store) {
  std::vector<std::string> problems;
  auto placeholders_of = [&](const std::string& body, const std::string& where) {
    std::set<std::string> keys;
    try {
      for (const auto& ph : find_placeholders(body)) {
        if (!known_placeholders().contains(ph.key)) {
          problems.push_back(where + ": unknown placeholder {{" + ph.key + "}}");
        }
        keys.insert(ph.key);
      }
    } catch (const TemplateError& e) {
      problems.push_back(where + ": " + e.what());
    }
    return keys;
  };
  auto require = [&](bool ok, const std::string& msg) {
    if (!ok) problems.push_back(msg);
  };

  const auto datasets = store.datasets();
  require(!datasets.empty(), "no templates found");
  for (const auto& ds : datasets) {
    for (const char* part : {"system", "prediction"}) {
      const auto where = ds + "/zeroshot/" + part;
      if (!store.contains(ds, "zeroshot", part)) {
        problems.push_back(where + ": missing");
        continue;
      }
      placeholders_of(store.get(ds, "zeroshot", part), where);
    }
    if (store.contains(ds, "zeroshot", "prediction")) {
      const auto& body = store.get(ds, "zeroshot", "prediction");
      require(body.find(std::string(kZeroShotInputMarker) + "{{smiles}}") !=
                  std::string::npos,
              ds + "/zeroshot/prediction: missing '" +
                  std::string(kZeroShotInputMarker) + "{{smiles}}'");
    }

    for (const auto& level : BlindingLevel::all()) {
      const auto dir = level_dir(level.level);
      bool complete = true;
      for (const char* part : {"system", "analysis", "prediction", "sample_list"}) {
        const auto where = ds + "/" + dir + "/" + part;
        if (!store.contains(ds, dir, part)) {
          problems.push_back(where + ": missing");
          complete = false;
          continue;
        }
        const auto keys = placeholders_of(store.get(ds, dir, part), where);
        const std::string p = part;
        if (p == "analysis") {
          require(keys.contains("inputs") && keys.contains("values"),
                  where + ": needs {{inputs}} and {{values}}");
          require(store.get(ds, dir, part).find(kTrainingDataMarker) !=
                      std::string::npos,
                  where + ": missing training data marker");
        } else if (p == "prediction") {
          const auto& body = store.get(ds, dir, part);
          require(keys.contains("test_input"), where + ": needs {{test_input}}");
          require(body.size() >= kOutputSyntaxLine.size() &&
                      body.compare(body.size() - kOutputSyntaxLine.size(),
                                   kOutputSyntaxLine.size(), kOutputSyntaxLine) == 0,
                  where + ": must end with " + std::string(kOutputSyntaxLine));
          require(body.find(kPredictionMarker) != std::string::npos,
                  where + ": missing prediction guide marker");
        } else if (p == "sample_list") {
          require(keys.contains("rows"), where + ": needs {{rows}}");
          require(store.get(ds, dir, part).find(kSampleListMarker) != std::string::npos,
                  where + ": missing sample list marker");
        }
      }
      if (!complete) continue;

      // Render a probe bundle through the lint.
      try {
        PromptRenderer renderer(store);
        const bool cipher = level.input_transformed;
        std::vector<ShotExample> shots;
        for (int i = 0; i < static_cast<int>(kAnalysisShotLimit) + 2; ++i) {
          shots.push_back({"probe " + std::to_string(i),
                           cipher ? utf8_encode(0x03B1 + (i % 20)) + utf8_encode(0x0430 + i)
                                  : "C" + std::string(static_cast<std::size_t>(i % 5 + 1), 'C') + "O" + std::to_string(i),
                           static_cast<double>(i)});
        }
        TestItem test{"probe test", cipher ? utf8_encode(0x0411) : "CCN"};
        renderer.render_level(level, ds, shots, test);
      } catch (const Error& e) {
        problems.push_back(ds + "/" + dir + ": " + e.what());
      }
    }
  }
  return problems;
}

}  // namespace blindbench
