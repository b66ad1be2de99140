#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cfa {

struct SourcePos {
  int line = 0;
  int col = 0;
};

/// Error thrown by all parsers in this project; carries the source position
/// of the offending token when one is known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, SourcePos pos)
      : std::runtime_error(msg + " (line " + std::to_string(pos.line) +
                           ", col " + std::to_string(pos.col) + ")"),
        pos_(pos) {}
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}

  SourcePos pos() const { return pos_; }

 private:
  SourcePos pos_{};
};

/// A parsed s-expression: symbol, integer literal, or parenthesized list.
struct Sexpr {
  enum class Kind { Symbol, Integer, List };

  Kind kind = Kind::List;
  SourcePos pos;
  std::string symbol;
  std::int64_t integer = 0;
  std::vector<Sexpr> items;

  bool is_symbol() const { return kind == Kind::Symbol; }
  bool is_symbol(const std::string& name) const {
    return kind == Kind::Symbol && symbol == name;
  }
  bool is_integer() const { return kind == Kind::Integer; }
  bool is_list() const { return kind == Kind::List; }
  // True for a list whose head is the given keyword symbol.
  bool head_is(const std::string& name) const {
    return is_list() && !items.empty() && items[0].is_symbol(name);
  }
};

/// Reads every top-level form in `source`. Comments run from ';' to end of
/// line. Throws ParseError on malformed input.
std::vector<Sexpr> read_sexprs(const std::string& source);

}  // namespace cfa
