#include "blindbench/synthetic.hpp"

#include <cstdio>
#include <stdexcept>

#include "blindbench/error.hpp"
#include "blindbench/promptgen.hpp"
#include "blindbench/rng.hpp"
#include "blindbench/text.hpp"
#include "blindbench/transform.hpp"

namespace blindbench {

std::size_t structural_token_count(std::string_view input) {
  try {
    return tokenize_smiles(input).size();
  } catch (const TokenizeError&) {
  } catch (const std::invalid_argument&) {
  }
  return utf8_code_points(input).size();
}

namespace {

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) {
      out.push_back(text.substr(pos));
      break;
    }
    out.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  return out;
}

// "- key: value" -> value, when the line has that key.
std::optional<std::string_view> keyed_line(std::string_view line, std::string_view key) {
  line = trim(line);
  if (line.size() < key.size() + 4 || line.substr(0, 2) != "- ") return std::nullopt;
  if (line.substr(2, key.size()) != key || line.substr(2 + key.size(), 2) != ": ") {
    return std::nullopt;
  }
  return trim(line.substr(key.size() + 4));
}

std::vector<std::string> bracket_list(std::string_view value) {
  const auto open = value.find('[');
  const auto close = value.rfind(']');
  if (open == std::string_view::npos || close == std::string_view::npos || close <= open) {
    return {};
  }
  const auto inner = trim(value.substr(open + 1, close - open - 1));
  if (inner.empty()) return {};
  std::vector<std::string> items;
  for (auto& item : split(inner, ", ")) items.emplace_back(trim(item));
  return items;
}

bool is_prediction_message(std::string_view text) {
  return text.find(kPredictionMarker) != std::string_view::npos ||
         text.find(kZeroShotInputMarker) != std::string_view::npos;
}

std::string wrap(const std::string& value, bool bracketed) {
  return bracketed ? "[" + value + "]" : value;
}

std::string fixed3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace

std::optional<std::string> extract_test_input(std::string_view message) {
  if (const auto pos = message.find(kZeroShotInputMarker);
      pos != std::string_view::npos && message.find(kPredictionMarker) == std::string_view::npos) {
    const auto start = pos + kZeroShotInputMarker.size();
    auto end = message.find('?', start);
    if (end == std::string_view::npos) end = message.find_first_of(" \n", start);
    return std::string(trim(message.substr(start, end - start)));
  }
  for (auto line : lines_of(message)) {
    for (auto key : kTestInputKeys) {
      if (auto v = keyed_line(line, key)) return std::string(*v);
    }
  }
  return std::nullopt;
}

std::vector<std::pair<std::string, double>> extract_examples(
    std::span<const ChatMessage> messages) {
  std::vector<std::pair<std::string, double>> out;
  for (const auto& m : messages) {
    if (m.role != "user") continue;
    const auto lines = lines_of(m.content);

    if (m.content.find(kTrainingDataMarker) != std::string::npos) {
      std::vector<std::string> inputs;
      std::vector<std::string> values;
      bool in_block = false;
      for (auto line : lines) {
        if (line.find(kTrainingDataMarker) != std::string_view::npos) {
          in_block = true;
          continue;
        }
        if (!in_block) continue;
        if (trim(line).empty()) break;
        for (auto key : kInputListKeys) {
          if (auto v = keyed_line(line, key)) inputs = bracket_list(*v);
        }
        // The value list is the last list of the block.
        if (trim(line).substr(0, 2) == "- " && line.find(": [") != std::string_view::npos) {
          values = bracket_list(line.substr(line.find(": [") + 2));
        }
      }
      if (inputs.size() == values.size()) {
        for (std::size_t i = 0; i < inputs.size(); ++i) {
          if (auto v = parse_double(values[i])) out.emplace_back(inputs[i], *v);
        }
      }
    }

    if (m.content.find(kSampleListMarker) != std::string::npos) {
      bool in_list = false;
      for (auto line : lines) {
        if (line.find(kSampleListMarker) != std::string_view::npos) {
          in_list = true;
          continue;
        }
        if (!in_list || trim(line).empty()) continue;
        const auto fields = split(line, kSampleListSeparator);
        if (fields.size() < 2) continue;
        if (auto v = parse_double(fields.back())) {
          out.emplace_back(std::string(trim(fields[fields.size() - 2])), *v);
        }
      }
    }
  }
  return out;
}

std::string synthetic_reply(const SyntheticBackendSpec& spec,
                            std::span<const ChatMessage> messages) {
  if (spec.kind == SyntheticKind::kSilent) return "";
  if (messages.empty()) throw std::invalid_argument("no messages");
  const auto& last = messages.back();
  if (!is_prediction_message(last.content)) {
    return "Analysis complete. Patterns noted.";
  }
  const bool bracketed = last.content.find(kPredictionMarker) != std::string::npos;
  const auto test = extract_test_input(last.content);
  if (!test) return spec.fallback;

  switch (spec.kind) {
    case SyntheticKind::kMemorizer: {
      if (!spec.lookup) return spec.fallback;
      const auto it = spec.lookup->find(*test);
      if (it == spec.lookup->end()) return spec.fallback;
      return wrap(it->second, bracketed);
    }
    case SyntheticKind::kPriorModel: {
      Prng rng(derive_seed(spec.seed, {"prior", *test}));
      const double x = static_cast<double>(structural_token_count(*test));
      const double value = spec.prior_intercept + spec.prior_slope * x +
                           spec.noise_scale * standard_normal(rng);
      return wrap(fixed3(value), bracketed);
    }
    case SyntheticKind::kIclRegressor: {
      const auto examples = extract_examples(messages);
      if (examples.empty()) return spec.fallback;
      const double n = static_cast<double>(examples.size());
      double mx = 0.0;
      double my = 0.0;
      for (const auto& [input, value] : examples) {
        mx += static_cast<double>(structural_token_count(input));
        my += value;
      }
      mx /= n;
      my /= n;
      double sxy = 0.0;
      double sxx = 0.0;
      for (const auto& [input, value] : examples) {
        const double dx = static_cast<double>(structural_token_count(input)) - mx;
        sxy += dx * (value - my);
        sxx += dx * dx;
      }
      const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
      const double x = static_cast<double>(structural_token_count(*test));
      return wrap(shortest_repr(my + slope * (x - mx)), bracketed);
    }
    case SyntheticKind::kSilent:
      break;
  }
  return "";
}

}  // namespace blindbench
