#include "cfa/sexpr.hpp"

#include <cctype>

namespace cfa {

namespace {

struct Reader {
  const std::string& src;
  std::size_t i = 0;
  SourcePos pos{1, 1};

  bool eof() const { return i >= src.size(); }
  char peek() const { return src[i]; }

  char pop() {
    char c = src[i++];
    if (c == '\n') {
      pos.line++;
      pos.col = 1;
    } else {
      pos.col++;
    }
    return c;
  }

  void skip_ws() {
    while (!eof()) {
      char c = peek();
      if (c == ';') {
        while (!eof() && peek() != '\n') pop();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        pop();
      } else {
        break;
      }
    }
  }

  static bool symbol_char(char c) {
    if (std::isalnum(static_cast<unsigned char>(c))) return true;
    switch (c) {
      case '_': case '-': case '+': case '*': case '/': case '?':
      case '!': case '<': case '>': case '=': case '$': case '.':
      case ':': case '%': case '@': case '#':
        return true;
      default:
        return false;
    }
  }

  Sexpr read_form() {
    skip_ws();
    if (eof()) throw ParseError("unexpected end of input", pos);
    SourcePos start = pos;
    char c = peek();
    if (c == '(') {
      pop();
      Sexpr list;
      list.kind = Sexpr::Kind::List;
      list.pos = start;
      for (;;) {
        skip_ws();
        if (eof()) throw ParseError("unbalanced '(' — missing ')'", start);
        if (peek() == ')') {
          pop();
          return list;
        }
        list.items.push_back(read_form());
      }
    }
    if (c == ')') throw ParseError("unexpected ')'", pos);
    // Atom: integer or symbol. A leading sign counts as an integer only when
    // followed by a digit.
    std::string text;
    while (!eof() && symbol_char(peek())) text += pop();
    if (text.empty())
      throw ParseError(std::string("unsupported character '") + c + "'", pos);
    bool numeric = std::isdigit(static_cast<unsigned char>(text[0])) ||
                   ((text[0] == '-' || text[0] == '+') && text.size() > 1 &&
                    std::isdigit(static_cast<unsigned char>(text[1])));
    if (numeric) {
      for (std::size_t j = (text[0] == '-' || text[0] == '+') ? 1 : 0;
           j < text.size(); ++j) {
        if (!std::isdigit(static_cast<unsigned char>(text[j])))
          throw ParseError("malformed integer literal '" + text + "'", start);
      }
      Sexpr atom;
      atom.kind = Sexpr::Kind::Integer;
      atom.pos = start;
      atom.integer = std::stoll(text);
      return atom;
    }
    Sexpr atom;
    atom.kind = Sexpr::Kind::Symbol;
    atom.pos = start;
    atom.symbol = std::move(text);
    return atom;
  }
};

}  // namespace

std::vector<Sexpr> read_sexprs(const std::string& source) {
  Reader r{source};
  std::vector<Sexpr> forms;
  for (;;) {
    r.skip_ws();
    if (r.eof()) break;
    forms.push_back(r.read_form());
  }
  return forms;
}

}  // namespace cfa
