#include "blindbench/transform.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "blindbench/csv.hpp"
#include "blindbench/error.hpp"
#include "blindbench/hash.hpp"
#include "blindbench/rng.hpp"
#include "blindbench/text.hpp"

namespace blindbench {

// ---------------------------------------------------------------------------
// LabelTransform

LabelTransform LabelTransform::fit(std::span<const double> labels,
                                   std::string fitted_on) {
  if (labels.size() < 2) {
    throw DegenerateRangeError("label transform needs at least two labels");
  }
  double lo = -labels.front();
  double hi = lo;
  for (double y : labels) {
    if (!std::isfinite(y)) {
      throw DegenerateRangeError("label transform got a non-finite label");
    }
    lo = std::min(lo, -y);
    hi = std::max(hi, -y);
  }
  if (!(hi > lo)) {
    throw DegenerateRangeError("all labels are equal; range has zero width");
  }
  return LabelTransform(lo, hi, std::move(fitted_on));
}

double LabelTransform::apply(double y) const {
  return 100.0 * (-y - neg_min_) / (neg_max_ - neg_min_);
}

double LabelTransform::invert(double v) const {
  return -(v / 100.0 * (neg_max_ - neg_min_) + neg_min_);
}

// ---------------------------------------------------------------------------
// Tokenizer

namespace {

bool is_bracket_content_char(char c) {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') ||
         (c >= '0' && c <= '9') || c == '+' || c == '-' || c == '@' ||
         c == '#' || c == ':' || c == '*' || c == '.';
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::string describe(char c) {
  const auto u = static_cast<unsigned char>(c);
  if (u < 0x20 || u >= 0x7f) {
    std::ostringstream os;
    os << "byte 0x" << std::hex << static_cast<int>(u);
    return os.str();
  }
  return std::string("'") + c + "'";
}

}  // namespace

bool is_smiles_character(char c) {
  constexpr std::string_view punct = "[]()=#-+/\\:~.%@*$";
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || is_digit(c) ||
         punct.find(c) != std::string_view::npos;
}

std::vector<SmilesToken> tokenize_smiles(std::string_view s) {
  if (s.empty()) throw std::invalid_argument("empty SMILES string");
  std::vector<SmilesToken> out;
  std::size_t i = 0;
  auto push = [&](std::size_t len, TokenKind kind) {
    out.push_back({std::string(s.substr(i, len)), kind});
    i += len;
  };
  while (i < s.size()) {
    const char c = s[i];
    const char next = i + 1 < s.size() ? s[i + 1] : '\0';
    switch (c) {
      case '[': {
        const auto close = s.find(']', i + 1);
        if (close == std::string_view::npos) {
          throw TokenizeError(i, "unterminated bracket atom");
        }
        if (close == i + 1) throw TokenizeError(i, "empty bracket atom");
        for (std::size_t k = i + 1; k < close; ++k) {
          if (!is_bracket_content_char(s[k])) {
            throw TokenizeError(k, "unexpected " + describe(s[k]) +
                                       " inside bracket atom");
          }
        }
        push(close - i + 1, TokenKind::kBracketAtom);
        break;
      }
      case 'C':
        push(next == 'l' ? 2 : 1, TokenKind::kOrganicAtom);
        break;
      case 'B':
        push(next == 'r' ? 2 : 1, TokenKind::kOrganicAtom);
        break;
      case 'N':
      case 'O':
      case 'P':
      case 'S':
      case 'F':
      case 'I':
        push(1, TokenKind::kOrganicAtom);
        break;
      case 'b':
      case 'c':
      case 'n':
      case 'o':
      case 'p':
      case 's':
        push(1, TokenKind::kAromaticAtom);
        break;
      case '%':
        if (!is_digit(next) || i + 2 >= s.size() || !is_digit(s[i + 2])) {
          throw TokenizeError(i, "'%' must be followed by two digits");
        }
        push(3, TokenKind::kRingClosure);
        break;
      case '-':
      case '=':
      case '#':
      case '/':
      case '\\':
      case ':':
      case '~':
        push(1, TokenKind::kBond);
        break;
      case '(':
      case ')':
        push(1, TokenKind::kBranch);
        break;
      case '.':
        push(1, TokenKind::kDot);
        break;
      default:
        if (is_digit(c)) {
          push(1, TokenKind::kRingClosure);
          break;
        }
        throw TokenizeError(i, "unexpected " + describe(c));
    }
  }
  return out;
}

std::set<std::string> collect_vocabulary(std::span<const std::string> corpus) {
  std::set<std::string> vocab;
  for (const auto& smiles : corpus) {
    for (auto& token : tokenize_smiles(smiles)) vocab.insert(std::move(token.text));
  }
  return vocab;
}

// ---------------------------------------------------------------------------
// SmilesCipher

const std::vector<std::string>& SmilesCipher::default_pool() {
  static const std::vector<std::string> pool = [] {
    std::vector<std::string> p;
    for (char32_t cp = 0x03B1; cp <= 0x03C9; ++cp) {
      if (cp != 0x03C2) p.push_back(utf8_encode(cp));  // skip final sigma
    }
    for (char32_t cp = 0x0391; cp <= 0x03A9; ++cp) {
      if (cp != 0x03A2) p.push_back(utf8_encode(cp));  // unassigned
    }
    for (char32_t cp = 0x0430; cp <= 0x044F; ++cp) p.push_back(utf8_encode(cp));
    for (char32_t cp = 0x0410; cp <= 0x042F; ++cp) p.push_back(utf8_encode(cp));
    return p;
  }();
  return pool;
}

SmilesCipher::SmilesCipher(Table forward) : forward_(std::move(forward)) {
  for (const auto& [token, sub] : forward_) {
    if (token.empty()) throw Error("cipher table has an empty token");
    if (utf8_code_points(sub).size() != 1) {
      throw Error("cipher substitute for '" + token +
                  "' is not a single character");
    }
    if (!inverse_.emplace(sub, token).second) {
      throw Error("cipher table is not injective: '" + sub +
                  "' assigned twice");
    }
  }
}

SmilesCipher SmilesCipher::build(const std::set<std::string>& vocabulary,
                                 std::uint64_t seed) {
  auto pool = default_pool();
  if (vocabulary.size() > pool.size()) {
    throw AlphabetExhaustedError(
        "vocabulary has " + std::to_string(vocabulary.size()) +
        " tokens but the substitute alphabet has " +
        std::to_string(pool.size()));
  }
  Prng rng(derive_seed(seed, {"cipher"}));
  shuffle_prefix(pool, rng, vocabulary.size());
  Table forward;
  std::size_t i = 0;
  for (const auto& token : vocabulary) forward.emplace(token, pool[i++]);
  return SmilesCipher(std::move(forward));
}

SmilesCipher SmilesCipher::from_table(Table forward) {
  return SmilesCipher(std::move(forward));
}

SmilesCipher SmilesCipher::read_csv(std::istream& in) {
  const auto rows = csv::read(in);
  if (rows.empty() || rows.front() != csv::Row{"token", "substitute"}) {
    throw Error("cipher CSV must start with a 'token,substitute' header");
  }
  Table forward;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != 2) throw RowError(r, "expected two columns");
    if (!forward.emplace(rows[r][0], rows[r][1]).second) {
      throw RowError(r, "duplicate token '" + rows[r][0] + "'");
    }
  }
  return SmilesCipher(std::move(forward));
}

void SmilesCipher::write_csv(std::ostream& out) const {
  csv::write_row(out, {"token", "substitute"});
  for (const auto& [token, sub] : forward_) csv::write_row(out, {token, sub});
}

std::string SmilesCipher::table_hash() const {
  std::ostringstream os;
  write_csv(os);
  return sha256_hex(os.str());
}

std::string SmilesCipher::encipher(std::string_view smiles) const {
  std::string out;
  for (const auto& token : tokenize_smiles(smiles)) {
    const auto it = forward_.find(token.text);
    if (it == forward_.end()) throw CipherMissError(token.text);
    out += it->second;
  }
  return out;
}

std::string SmilesCipher::decipher(std::string_view ciphered) const {
  if (ciphered.empty()) throw std::invalid_argument("empty ciphered string");
  std::string out;
  for (const auto& cp : utf8_code_points(ciphered)) {
    const auto it = inverse_.find(cp);
    if (it == inverse_.end()) throw CipherMissError(cp);
    out += it->second;
  }
  return out;
}

}  // namespace blindbench
