#pragma once

// Blinding transforms: the affine label rescale with exact inverse, the SMILES
// tokenizer, and the token-level substitution cipher.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace blindbench {

/// Negate-and-rescale map onto [0, 100]:
///   forward(y) = 100 * (-y - neg_min) / (neg_max - neg_min)
/// The largest label maps to 0 and the smallest to 100.
class LabelTransform {
 public:
  static LabelTransform fit(std::span<const double> labels,
                            std::string fitted_on = {});

  double apply(double y) const;
  /// Linear extrapolation outside [0, 100]; never clamps.
  double invert(double v) const;

  double neg_min() const noexcept { return neg_min_; }
  double neg_max() const noexcept { return neg_max_; }
  const std::string& fitted_on() const noexcept { return fitted_on_; }

 private:
  LabelTransform(double neg_min, double neg_max, std::string fitted_on)
      : neg_min_(neg_min), neg_max_(neg_max), fitted_on_(std::move(fitted_on)) {}

  double neg_min_;
  double neg_max_;
  std::string fitted_on_;
};

inline LabelTransform fit_label_transform(std::span<const double> labels,
                                          std::string fitted_on = {}) {
  return LabelTransform::fit(labels, std::move(fitted_on));
}

enum class TokenKind {
  kOrganicAtom,
  kAromaticAtom,
  kBracketAtom,
  kRingClosure,
  kBond,
  kBranch,
  kDot,
};

struct SmilesToken {
  std::string text;
  TokenKind kind;

  bool operator==(const SmilesToken&) const = default;
};

/// Splits a SMILES string into tokens whose concatenation is the input.
/// Throws TokenizeError (with the 0-based offset) on characters outside the
/// accepted vocabulary and std::invalid_argument on empty input.
std::vector<SmilesToken> tokenize_smiles(std::string_view smiles);

/// Distinct token texts across a corpus.
std::set<std::string> collect_vocabulary(std::span<const std::string> corpus);

/// Bijective token -> substitute-character table. Substitutes are single
/// Unicode code points stored as UTF-8.
class SmilesCipher {
 public:
  using Table = std::map<std::string, std::string>;

  /// Assigns substitutes from the default pool, shuffled by `seed`. The
  /// default pool (Greek then Cyrillic letters) shares no character with any
  /// SMILES token.
  static SmilesCipher build(const std::set<std::string>& vocabulary,
                            std::uint64_t seed);

  /// Explicit table; rejects non-injective maps and multi-character
  /// substitutes.
  static SmilesCipher from_table(Table forward);

  /// Two-column CSV with a "token,substitute" header.
  static SmilesCipher read_csv(std::istream& in);
  void write_csv(std::ostream& out) const;

  std::string encipher(std::string_view smiles) const;
  std::string decipher(std::string_view ciphered) const;

  const Table& forward_map() const noexcept { return forward_; }
  const Table& inverse_map() const noexcept { return inverse_; }
  /// SHA-256 of the CSV export.
  std::string table_hash() const;

  static const std::vector<std::string>& default_pool();

 private:
  explicit SmilesCipher(Table forward);

  Table forward_;
  Table inverse_;
};

inline SmilesCipher build_cipher(const std::set<std::string>& vocabulary,
                                 std::uint64_t seed) {
  return SmilesCipher::build(vocabulary, seed);
}

/// True when `c` can occur inside some SMILES token (ASCII letters, digits
/// and SMILES punctuation).
bool is_smiles_character(char c);

}  // namespace blindbench
