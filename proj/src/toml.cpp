#include "blindbench/toml.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "blindbench/error.hpp"
#include "blindbench/text.hpp"

namespace blindbench::toml {

namespace {

using nlohmann::json;

class Parser {
 public:
  explicit Parser(std::string_view text) : s_(text) {}

  json run() {
    json root = json::object();
    json* table = &root;
    for (;;) {
      skip_blank_lines();
      if (eof()) break;
      if (peek() == '[') {
        table = header(root);
      } else {
        key_value(*table);
      }
      end_of_line();
    }
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("toml line " + std::to_string(line_) + ": " + what);
  }

  bool eof() const { return i_ >= s_.size(); }
  char peek() const { return eof() ? '\0' : s_[i_]; }
  char get() {
    const char c = s_[i_++];
    if (c == '\n') ++line_;
    return c;
  }

  void skip_ws() {
    while (!eof() && (peek() == ' ' || peek() == '\t')) ++i_;
  }

  void skip_comment() {
    if (peek() == '#') {
      while (!eof() && peek() != '\n') ++i_;
    }
  }

  // Whitespace, newlines and comments.
  void skip_all() {
    for (;;) {
      skip_ws();
      skip_comment();
      if (!eof() && (peek() == '\n' || peek() == '\r')) {
        get();
        continue;
      }
      return;
    }
  }

  void skip_blank_lines() { skip_all(); }

  void end_of_line() {
    skip_ws();
    skip_comment();
    if (peek() == '\r') ++i_;
    if (eof()) return;
    if (peek() != '\n') fail("unexpected text after value");
    get();
  }

  std::vector<std::string> key_path() {
    std::vector<std::string> parts;
    for (;;) {
      skip_ws();
      parts.push_back(key_part());
      skip_ws();
      if (peek() != '.') break;
      ++i_;
    }
    return parts;
  }

  std::string key_part() {
    if (peek() == '"') return basic_string();
    if (peek() == '\'') return literal_string();
    const auto start = i_;
    while (!eof()) {
      const char c = peek();
      if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
          c == '_' || c == '-') {
        ++i_;
      } else {
        break;
      }
    }
    if (i_ == start) fail("expected key");
    return std::string(s_.substr(start, i_ - start));
  }

  // Walks (creating) nested tables; the last element of an array of tables is
  // entered.
  static json* descend(json* t, const std::string& k, bool& conflict) {
    auto& next = (*t)[k];
    if (next.is_null()) next = json::object();
    if (next.is_array() && !next.empty() && next.back().is_object()) return &next.back();
    if (!next.is_object()) {
      conflict = true;
      return t;
    }
    return &next;
  }

  json* header(json& root) {
    ++i_;
    const bool array = peek() == '[';
    if (array) ++i_;
    const auto path = key_path();
    if (peek() != ']') fail("expected ']'");
    ++i_;
    if (array) {
      if (peek() != ']') fail("expected ']]'");
      ++i_;
    }
    json* t = &root;
    bool conflict = false;
    for (std::size_t k = 0; k + 1 < path.size(); ++k) {
      t = descend(t, path[k], conflict);
      if (conflict) fail("key '" + path[k] + "' is not a table");
    }
    auto& leaf = (*t)[path.back()];
    if (array) {
      if (leaf.is_null()) leaf = json::array();
      if (!leaf.is_array()) fail("key '" + path.back() + "' is not an array of tables");
      leaf.push_back(json::object());
      return &leaf.back();
    }
    if (leaf.is_null()) leaf = json::object();
    if (!leaf.is_object()) fail("key '" + path.back() + "' is not a table");
    return &leaf;
  }

  void key_value(json& table) {
    const auto path = key_path();
    skip_ws();
    if (peek() != '=') fail("expected '='");
    ++i_;
    skip_ws();
    json* t = &table;
    bool conflict = false;
    for (std::size_t k = 0; k + 1 < path.size(); ++k) {
      t = descend(t, path[k], conflict);
      if (conflict) fail("key '" + path[k] + "' is not a table");
    }
    if (t->contains(path.back())) fail("duplicate key '" + path.back() + "'");
    (*t)[path.back()] = value();
  }

  json value() {
    const char c = peek();
    if (c == '"') return basic_string();
    if (c == '\'') return literal_string();
    if (c == '[') return array();
    if (c == '{') return inline_table();
    if (s_.substr(i_, 4) == "true") {
      i_ += 4;
      return true;
    }
    if (s_.substr(i_, 5) == "false") {
      i_ += 5;
      return false;
    }
    return number();
  }

  std::string basic_string() {
    if (s_.substr(i_, 3) == "\"\"\"") fail("multi-line strings are not supported");
    ++i_;
    std::string out;
    for (;;) {
      if (eof() || peek() == '\n') fail("unterminated string");
      const char c = get();
      if (c == '"') return out;
      if (c != '\\') {
        out += c;
        continue;
      }
      if (eof()) fail("unterminated string");
      const char e = get();
      switch (e) {
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case 'r': out += '\r'; break;
        case 'b': out += '\b'; break;
        case 'f': out += '\f'; break;
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        case 'u':
        case 'U': {
          const std::size_t len = e == 'u' ? 4 : 8;
          if (i_ + len > s_.size()) fail("short unicode escape");
          unsigned long cp = 0;
          const auto hex = s_.substr(i_, len);
          auto [p, ec] = std::from_chars(hex.data(), hex.data() + len, cp, 16);
          if (ec != std::errc() || p != hex.data() + len) fail("bad unicode escape");
          i_ += len;
          out += utf8_encode(static_cast<char32_t>(cp));
          break;
        }
        default:
          fail(std::string("bad escape '\\") + e + "'");
      }
    }
  }

  std::string literal_string() {
    if (s_.substr(i_, 3) == "'''") fail("multi-line strings are not supported");
    ++i_;
    const auto start = i_;
    while (!eof() && peek() != '\'' && peek() != '\n') ++i_;
    if (peek() != '\'') fail("unterminated string");
    std::string out(s_.substr(start, i_ - start));
    ++i_;
    return out;
  }

  json array() {
    ++i_;
    json out = json::array();
    for (;;) {
      skip_all();
      if (peek() == ']') {
        ++i_;
        return out;
      }
      out.push_back(value());
      skip_all();
      if (peek() == ',') {
        ++i_;
        continue;
      }
      if (peek() != ']') fail("expected ',' or ']' in array");
    }
  }

  json inline_table() {
    ++i_;
    json out = json::object();
    skip_ws();
    if (peek() == '}') {
      ++i_;
      return out;
    }
    for (;;) {
      key_value(out);
      skip_ws();
      if (peek() == ',') {
        ++i_;
        skip_ws();
        continue;
      }
      if (peek() != '}') fail("expected ',' or '}' in inline table");
      ++i_;
      return out;
    }
  }

  json number() {
    const auto start = i_;
    while (!eof()) {
      const char c = peek();
      if ((c >= '0' && c <= '9') || c == '+' || c == '-' || c == '.' || c == '_' ||
          c == 'e' || c == 'E' || c == 'i' || c == 'n' || c == 'f' || c == 'a') {
        ++i_;
      } else {
        break;
      }
    }
    std::string text;
    for (char c : s_.substr(start, i_ - start)) {
      if (c != '_') text += c;
    }
    if (text.empty()) fail("expected value");
    const bool is_float = text.find_first_of(".eE") != std::string::npos ||
                          text.find("inf") != std::string::npos ||
                          text.find("nan") != std::string::npos;
    if (!is_float) {
      const char* b = text.data();
      if (*b == '+') ++b;
      long long v = 0;
      auto [p, ec] = std::from_chars(b, text.data() + text.size(), v);
      if (ec != std::errc() || p != text.data() + text.size()) fail("bad number '" + text + "'");
      return v;
    }
    const auto v = parse_double(text);
    if (!v) fail("bad number '" + text + "'");
    return *v;
  }

  std::string_view s_;
  std::size_t i_ = 0;
  std::size_t line_ = 1;
};

}  // namespace

nlohmann::json parse(std::string_view text) { return Parser(text).run(); }

nlohmann::json parse_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

}  // namespace blindbench::toml
