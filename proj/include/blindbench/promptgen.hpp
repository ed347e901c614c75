#pragma once

// Prompt rendering for the zero-shot prompt and the six blinding levels.
//
// Templates live on disk as templates/<dataset>/<zeroshot|1..6>/<part>.txt,
// where <part> is one of system, analysis, prediction, sample_list. Templates
// use {{placeholder}} markers:
//
//   zeroshot/prediction  {{smiles}}
//   analysis             {{names}} {{inputs}} {{values}}   (comma-joined lists)
//   prediction           {{test_name}} {{test_input}}
//   sample_list          {{rows}}
//
// A template may omit placeholders it does not need (agnostic templates never
// show names) but may not use unknown ones.

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "blindbench/dataset.hpp"

namespace blindbench {

enum class ContextTier { kSpecific, kGeneric, kAgnostic };

std::string_view to_string(ContextTier tier);

struct BlindingLevel {
  int level = 1;
  ContextTier tier = ContextTier::kSpecific;
  bool label_transformed = false;
  bool input_transformed = false;

  /// The fixed six-level table; throws std::out_of_range outside 1..6.
  static BlindingLevel from_number(int level);
  static const std::vector<BlindingLevel>& all();

  bool operator==(const BlindingLevel&) const = default;
};

/// Shots beyond this count move from the analysis message to the sample list.
inline constexpr std::size_t kAnalysisShotLimit = 60;

// Markers the templates must contain; synthetic backends locate prompt data
// through them.
inline constexpr std::string_view kZeroShotInputMarker = "SMILES string: ";
inline constexpr std::string_view kSampleListMarker = "**Additional Training Data**";
inline constexpr std::string_view kTrainingDataMarker = "**Training Data:**";
inline constexpr std::string_view kPredictionMarker = "**Prediction Guide:**";
inline constexpr std::string_view kOutputSyntaxLine = "Syntax: \"[Value]\"";
/// List keys for the input strings in an analysis message.
inline constexpr std::string_view kInputListKeys[] = {"SMILES",
                                                      "Sample structure strings"};
/// Line keys for the test input in a prediction message.
inline constexpr std::string_view kTestInputKeys[] = {"SMILES", "Structure string"};
inline constexpr std::string_view kSampleListSeparator = " | ";

struct ShotExample {
  std::string name;
  std::string input;
  double value = 0.0;
};

struct TestItem {
  std::string name;
  std::string input;
};

struct BundleMeta {
  std::string dataset;
  /// 0 for the zero-shot prompt.
  int level = 0;
  std::size_t shots = 0;
  MoleculeId molecule_id = 0;
};

struct PromptBundle {
  std::string system;
  std::optional<std::string> sample_list;
  std::optional<std::string> analysis;
  std::string prediction;
  BundleMeta meta;
};

nlohmann::json to_json(const PromptBundle& b);

/// Replaces {{key}} markers. Throws TemplateError on unknown or unterminated
/// markers.
std::string fill_template(std::string_view tmpl,
                          const std::map<std::string, std::string>& values);

class TemplateStore {
 public:
  static TemplateStore load(const std::filesystem::path& root);
  /// Keys are "<dataset>/<zeroshot|1..6>/<part>".
  static TemplateStore from_map(std::map<std::string, std::string> templates);

  const std::string& get(std::string_view dataset, std::string_view level_dir,
                         std::string_view part) const;
  bool contains(std::string_view dataset, std::string_view level_dir,
                std::string_view part) const;
  std::vector<std::string> datasets() const;
  /// SHA-256 over every template key and body.
  std::string version() const;

 private:
  std::map<std::string, std::string, std::less<>> templates_;
};

std::string level_dir(int level);

/// Problems found while checking a template directory; empty when valid.
std::vector<std::string> validate_templates(const TemplateStore& store);

class PromptRenderer {
 public:
  explicit PromptRenderer(const TemplateStore& store) : store_(&store) {}

  PromptBundle render_zero_shot(const std::string& dataset, std::string_view smiles,
                                MoleculeId molecule_id = 0) const;

  /// Shot values and inputs must already be transformed as the level
  /// requires; the renderer never transforms. Throws LeakageError when the
  /// test input appears among the shots and VocabularyLeakError when the
  /// rendered text breaks the tier's vocabulary rules.
  PromptBundle render_level(const BlindingLevel& level, const std::string& dataset,
                            std::span<const ShotExample> shots, const TestItem& test,
                            MoleculeId molecule_id = 0) const;

  /// One line per overflow sample after the header; empty text for no rows.
  std::string render_sample_list(const BlindingLevel& level,
                                 const std::string& dataset,
                                 std::span<const ShotExample> overflow) const;

  std::string render_prediction_guide(const BlindingLevel& level,
                                      const std::string& dataset,
                                      const TestItem& test) const;

 private:
  const TemplateStore* store_;
};

/// Terms a bundle at this level must not contain (lower case).
std::vector<std::string> banned_terms(const BlindingLevel& level,
                                      std::string_view dataset);

/// Throws VocabularyLeakError on the first banned term or, for agnostic
/// bundles, on any raw SMILES character in the given input strings.
void lint_bundle(const PromptBundle& bundle, const BlindingLevel& level,
                 std::span<const std::string> input_strings = {});

}  // namespace blindbench
