#include "cfa/scheme_to_cps.hpp"

#include <functional>
#include <set>

#include "cfa/sexpr.hpp"

namespace cfa {

namespace {

const std::set<std::string> kReservedNames = {
    "define", "lambda", "begin", "if", "kappa", kHaltName};

// Scheme special forms outside the supported subset; rejected explicitly so
// they do not read as applications of unbound variables.
const std::set<std::string> kUnsupportedForms = {
    "set!", "let", "let*", "letrec", "letrec*", "quote", "quasiquote",
    "cond",  "case", "and",  "or",     "when",    "unless", "do",
    "delay", "lambda*"};

// Continuations during conversion are carried as source text: either a
// variable name ("halt", "$k3") or a literal (kappa (v) ...) form. Applying
// a literal kappa to an atom is how sequencing and define-binding happen.
using Cont = std::string;
using AtomCtx = std::function<std::string(const std::string&)>;

class Converter {
 public:
  std::string run(const std::string& source) {
    auto forms = read_sexprs(source);
    if (forms.empty()) throw ParseError("empty program");
    if (forms.back().head_is("define"))
      throw ParseError("program must end with a result expression",
                       forms.back().pos);
    return top_level(forms, 0);
  }

 private:
  unsigned gensym_ = 0;
  std::vector<std::string> scope_;

  std::string fresh(const char* stem) {
    return std::string("$") + stem + std::to_string(gensym_++);
  }

  static void check_name(const Sexpr& s) {
    if (!s.is_symbol())
      throw ParseError("expected an identifier", s.pos);
    if (kReservedNames.count(s.symbol) || kUnsupportedForms.count(s.symbol))
      throw ParseError("reserved name '" + s.symbol + "'", s.pos);
    if (s.symbol[0] == '$')
      throw ParseError("identifiers starting with '$' are reserved", s.pos);
  }

  void check_bound(const Sexpr& s) {
    check_name(s);
    if (std::find(scope_.begin(), scope_.end(), s.symbol) == scope_.end())
      throw ParseError("unbound variable '" + s.symbol + "'", s.pos);
  }

  static bool is_atomic(const Sexpr& e) {
    return e.is_integer() || e.is_symbol() || e.head_is("lambda");
  }

  std::string apply_cont(const Cont& k, const std::string& atom) {
    return "(" + k + " " + atom + ")";
  }

  // Top-level statement sequence; the last form's value goes to halt.
  std::string top_level(const std::vector<Sexpr>& forms, std::size_t i) {
    const Sexpr& form = forms[i];
    bool last = i + 1 == forms.size();
    if (form.head_is("define")) {
      if (form.items.size() < 3)
        throw ParseError("malformed define", form.pos);
      const Sexpr& head = form.items[1];
      if (head.is_list()) {
        // (define (f params...) body...). The name is visible to later
        // forms, not inside its own body (defines are non-recursive).
        if (head.items.empty())
          throw ParseError("malformed function define", head.pos);
        check_name(head.items[0]);
        std::string lam = make_lambda(head.items, 1, form.items, 2);
        scope_.push_back(head.items[0].symbol);
        std::string rest = top_level(forms, i + 1);
        scope_.pop_back();
        return "((kappa (" + head.items[0].symbol + ") " + rest + ") " + lam +
               ")";
      }
      // (define x e)
      check_name(head);
      if (form.items.size() != 3)
        throw ParseError("malformed define", form.pos);
      scope_.push_back(head.symbol);
      std::string rest = top_level(forms, i + 1);
      scope_.pop_back();
      return convert(form.items[2],
                     "(kappa (" + head.symbol + ") " + rest + ")");
    }
    if (last) return convert(form, kHaltName);
    std::string rest = top_level(forms, i + 1);
    return convert(form, "(kappa (" + fresh("ig") + ") " + rest + ")");
  }

  // Emits a user procedure with an appended continuation parameter. Params
  // are params[param_start..]; the body is body[body_start..].
  std::string make_lambda(const std::vector<Sexpr>& params,
                          std::size_t param_start,
                          const std::vector<Sexpr>& body,
                          std::size_t body_start) {
    std::string kvar = fresh("k");
    std::string out = "(lambda (";
    std::set<std::string> seen;
    std::size_t mark = scope_.size();
    for (std::size_t j = param_start; j < params.size(); ++j) {
      check_name(params[j]);
      if (!seen.insert(params[j].symbol).second)
        throw ParseError("duplicate parameter '" + params[j].symbol + "'",
                         params[j].pos);
      out += params[j].symbol + " ";
      scope_.push_back(params[j].symbol);
    }
    out += kvar + ") ";
    out += sequence(body, body_start, kvar);
    out += ")";
    scope_.resize(mark);
    return out;
  }

  // Body/begin sequence: all but the last for effect, last in tail position.
  std::string sequence(const std::vector<Sexpr>& items, std::size_t i,
                       const Cont& k) {
    if (i >= items.size())
      throw ParseError("empty body", items.empty() ? SourcePos{} : items[0].pos);
    if (items[i].head_is("define"))
      throw ParseError("define is only allowed at top level", items[i].pos);
    if (i + 1 == items.size()) return convert(items[i], k);
    return convert(items[i],
                   "(kappa (" + fresh("ig") + ") " +
                       sequence(items, i + 1, k) + ")");
  }

  // Converts an atomic expression to atom text.
  std::string atom_text(const Sexpr& e) {
    if (e.is_integer()) return std::to_string(e.integer);
    if (e.is_symbol()) {
      check_bound(e);
      return e.symbol;
    }
    // lambda literal
    if (e.items.size() < 3 || !e.items[1].is_list())
      throw ParseError("malformed lambda", e.pos);
    return make_lambda(e.items[1].items, 0, e.items, 2);
  }

  // Names the value of `e`, then continues with `ctx`.
  std::string name(const Sexpr& e, const AtomCtx& ctx) {
    if (is_atomic(e)) return ctx(atom_text(e));
    std::string t = fresh("t");
    return convert(e, "(kappa (" + t + ") " + ctx(t) + ")");
  }

  // Names each of items[i..] in order, accumulating atom texts.
  std::string name_all(const std::vector<Sexpr>& items, std::size_t i,
                       std::vector<std::string>& atoms,
                       const std::function<std::string()>& done) {
    if (i >= items.size()) return done();
    return name(items[i], [&](const std::string& a) {
      atoms.push_back(a);
      return name_all(items, i + 1, atoms, done);
    });
  }

  std::string convert(const Sexpr& e, const Cont& k) {
    if (is_atomic(e)) return apply_cont(k, atom_text(e));
    if (!e.is_list() || e.items.empty())
      throw ParseError("unsupported form", e.pos);
    if (e.head_is("define"))
      throw ParseError("define is only allowed at top level", e.pos);
    if (e.head_is("begin")) {
      if (e.items.size() < 2) throw ParseError("empty begin", e.pos);
      return sequence(e.items, 1, k);
    }
    if (e.head_is("if")) {
      // Church-style selection: the condition procedure receives both arms
      // as one-argument continuation thunks plus the join continuation, and
      // resumes the chosen arm with it.
      if (e.items.size() != 4)
        throw ParseError("if needs a condition and two arms", e.pos);
      return name(e.items[1], [&](const std::string& c) {
        std::string j1 = fresh("j");
        std::string j2 = fresh("j");
        return "(" + c + " (kappa (" + j1 + ") " +
               convert(e.items[2], j1) + ") (kappa (" + j2 + ") " +
               convert(e.items[3], j2) + ") " + k + ")";
      });
    }
    if (e.items[0].is_symbol() &&
        (kUnsupportedForms.count(e.items[0].symbol) ||
         (kReservedNames.count(e.items[0].symbol) &&
          !e.items[0].is_symbol("lambda"))))
      throw ParseError("unsupported form '" + e.items[0].symbol + "'",
                       e.pos);
    // Application: evaluate operator then operands, pass k as the final
    // continuation argument.
    std::vector<std::string> atoms;
    return name_all(e.items, 0, atoms, [&]() {
      std::string call = "(";
      for (const std::string& a : atoms) call += a + " ";
      call += k + ")";
      return call;
    });
  }
};

}  // namespace

std::string cps_convert_to_text(const std::string& direct_source) {
  return Converter().run(direct_source);
}

CpsProgramPtr cps_convert(const std::string& direct_source) {
  return parse_cps(cps_convert_to_text(direct_source));
}

}  // namespace cfa
