#include "fixtures.hpp"

#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <unistd.h>

#include "blindbench/rng.hpp"
#include "blindbench/transform.hpp"

#ifndef BLINDBENCH_TEMPLATE_DIR
#error "BLINDBENCH_TEMPLATE_DIR must be defined"
#endif
#ifndef BLINDBENCH_SOURCE_DIR
#error "BLINDBENCH_SOURCE_DIR must be defined"
#endif

namespace blindbench::fixtures {

namespace {

const char* const kFragments[] = {
    "C",      "C",        "CC",      "O",        "N",       "Cl",       "F",
    "Br",     "C(=O)O",   "C(C)C",   "C=C",      "C#N",     "S",        "c1ccccc1",
    "c1ccncc1", "C(=O)N", "OC",      "C(F)(F)F", "[N+](=O)[O-]", "I",   "c1ccc(O)cc1",
    "CCO",    "C1CCCCC1", "C(Cl)Cl", "P(=O)(O)O", "[NH3+]", "C/C=C/C",  "c1ccsc1",
};

std::string random_smiles(Prng& rng) {
  const std::size_t parts = 1 + uniform_below(rng, 6);
  std::string s;
  for (std::size_t i = 0; i < parts; ++i) {
    s += kFragments[uniform_below(rng, std::size(kFragments))];
  }
  if (uniform_below(rng, 25) == 0) s += ".[Na+]";
  return s;
}

std::string fmt(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string out = buf;
  if (out == "-0.00" || out == "-0.000") out.erase(0, 1);
  return out;
}

}  // namespace

std::string synthetic_csv(std::size_t n, std::uint64_t seed, LabelStyle style) {
  Prng rng(derive_seed(seed, {"fixture"}));
  std::ostringstream out;
  out << "name,smiles,value\n";
  std::set<std::string> seen;
  std::size_t row = 0;
  while (row < n) {
    const auto smiles = random_smiles(rng);
    if (!seen.insert(smiles).second) continue;
    const double tokens = static_cast<double>(tokenize_smiles(smiles).size());
    const double noise = standard_normal(rng);
    std::string label;
    if (style == LabelStyle::kLogScale) {
      label = fmt(1.0 - 0.18 * tokens + 0.6 * noise, 2);
    } else {
      label = fmt(-300.0 - 95.0 * tokens + 40.0 * noise, 3);
    }
    out << "\"Entry " << row << "\"," << smiles << "," << label << "\n";
    ++row;
  }
  return out.str();
}

ColumnMapping synthetic_mapping() {
  ColumnMapping m;
  m.smiles_column = "smiles";
  m.label_column = "value";
  m.name_column = "name";
  m.unit = "unit";
  return m;
}

Dataset synthetic_dataset(const std::string& name, std::size_t n, std::uint64_t seed,
                          LabelStyle style) {
  std::istringstream in(synthetic_csv(n, seed, style));
  return load_dataset(in, name, synthetic_mapping());
}

DatasetConfig write_synthetic_dataset(const std::filesystem::path& dir, const std::string& name,
                                      std::size_t n, std::uint64_t seed, LabelStyle style) {
  std::filesystem::create_directories(dir);
  const auto path = dir / (name + ".csv");
  std::ofstream(path, std::ios::binary) << synthetic_csv(n, seed, style);
  return {name, path, synthetic_mapping()};
}

std::filesystem::path temp_dir(const std::string& tag) {
  static int counter = 0;
  const auto p = std::filesystem::temp_directory_path() /
                 ("blindbench-" + tag + "-" + std::to_string(::getpid()) + "-" +
                  std::to_string(counter++));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

std::filesystem::path template_dir() { return BLINDBENCH_TEMPLATE_DIR; }
std::filesystem::path source_dir() { return BLINDBENCH_SOURCE_DIR; }

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}


std::vector<GoldenCase> golden_cases() {
  const auto store = TemplateStore::load(template_dir());
  const PromptRenderer renderer(store);
  std::vector<GoldenCase> out;
  for (const auto& ds : store.datasets()) {
    const auto data = synthetic_dataset(ds, 1300, 17,
                                        ds == "qm7" ? LabelStyle::kEnergy : LabelStyle::kLogScale);
    const auto split = make_split(data, 42, 150);
    const auto& test = data.records[split.test_ids.front()];
    const auto transform = LabelTransform::fit(data.labels());
    const auto cipher = build_cipher(collect_vocabulary(data.smiles()), derive_seed(7, {ds}));

    GoldenCase zs{ds + "_zeroshot_0", 0, renderer.render_zero_shot(ds, test.smiles, test.id),
                  {test.smiles}};
    out.push_back(std::move(zs));
    for (const auto& level : BlindingLevel::all()) {
      for (std::size_t k : {std::size_t{60}, std::size_t{1000}}) {
        std::vector<ShotExample> shots;
        std::vector<std::string> inputs;
        for (auto id : sample_shots(split, k, 42)) {
          const auto& s = data.records[id];
          auto in = level.input_transformed ? cipher.encipher(s.smiles) : s.smiles;
          inputs.push_back(in);
          shots.push_back({s.display_name(), std::move(in),
                           level.label_transformed ? transform.apply(s.label) : s.label});
        }
        const TestItem item{test.display_name(),
                            level.input_transformed ? cipher.encipher(test.smiles) : test.smiles};
        inputs.push_back(item.input);
        out.push_back({ds + "_" + std::to_string(level.level) + "_" + std::to_string(k),
                       level.level, renderer.render_level(level, ds, shots, item, test.id),
                       std::move(inputs)});
      }
    }
  }
  return out;
}

std::filesystem::path golden_dir() { return source_dir() / "tests/golden"; }

}  // namespace blindbench::fixtures
