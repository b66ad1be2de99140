#include "cfa/cps_ast.hpp"

#include <algorithm>
#include <set>

namespace cfa {

namespace {

bool is_cps_keyword(const std::string& s) {
  return s == "lambda" || s == "kappa";
}

}  // namespace

/// Builds a CpsProgram from s-expressions: assigns preorder labels, renames
/// binders to fresh uids, and computes the free-variable tables.
class CpsBuilder {
 public:
  CpsProgramPtr build(const std::string& source) {
    auto forms = read_sexprs(source);
    if (forms.empty()) throw ParseError("empty program");
    if (forms.size() > 1)
      throw ParseError("expected a single top-level call form", forms[1].pos);
    prog_ = std::make_shared<CpsProgram>();
    const Sexpr& top = forms[0];
    if (top.head_is("lambda") || top.head_is("kappa")) {
      // Still build it so body-shape errors surface first (they are the
      // more informative diagnostic), then reject the root.
      build_lam(top, {});
      throw ParseError("program root must be a call site, not a lambda",
                       top.pos);
    }
    if (!top.is_list())
      throw ParseError("program root must be a call site", top.pos);
    prog_->root_ = build_call(top, {});
    finalize();
    return prog_;
  }

 private:
  using Scope = std::vector<std::map<std::string, VarId>>;

  std::shared_ptr<CpsProgram> prog_;
  Label next_label_ = 0;
  std::map<std::string, VarId> free_names_;

  Label fresh_label() { return next_label_++; }

  VarId fresh_var(const std::string& name) {
    VarId id = static_cast<VarId>(prog_->vars_.size());
    prog_->vars_.push_back(VarInfo{name, id});
    return id;
  }

  VarId resolve(const std::string& name, const Scope& scope, SourcePos pos) {
    for (auto it = scope.rbegin(); it != scope.rend(); ++it) {
      auto found = it->find(name);
      if (found != it->end()) return found->second;
    }
    // Free occurrence: one uid per free name program-wide.
    auto found = free_names_.find(name);
    if (found != free_names_.end()) return found->second;
    if (is_cps_keyword(name))
      throw ParseError("keyword '" + name + "' used as a variable", pos);
    VarId id = fresh_var(name);
    free_names_.emplace(name, id);
    return id;
  }

  const Lam* build_lam(const Sexpr& form, const Scope& scope) {
    // (lambda (v ...) call) | (kappa (v ...) call)
    if (form.items.size() != 3)
      throw ParseError("lambda form needs a parameter list and a body",
                       form.pos);
    const Sexpr& plist = form.items[1];
    if (!plist.is_list())
      throw ParseError("expected parameter list", plist.pos);
    Lam& lam = prog_->lam_arena_.emplace_back();
    lam.label = fresh_label();
    lam.kind = form.items[0].is_symbol("kappa") ? LamKind::Continuation
                                                : LamKind::Procedure;
    Scope inner = scope;
    inner.emplace_back();
    for (const Sexpr& p : plist.items) {
      if (!p.is_symbol())
        throw ParseError("parameter must be an identifier", p.pos);
      if (is_cps_keyword(p.symbol))
        throw ParseError("keyword '" + p.symbol + "' used as a parameter",
                         p.pos);
      if (inner.back().count(p.symbol))
        throw ParseError("duplicate parameter '" + p.symbol + "'", p.pos);
      VarId id = fresh_var(p.symbol);
      inner.back().emplace(p.symbol, id);
      lam.params.push_back(id);
    }
    const Sexpr& body = form.items[2];
    if (!body.is_list() || body.head_is("lambda") || body.head_is("kappa"))
      throw ParseError("lambda body is not a call site", body.pos);
    lam.body = build_call(body, inner);
    prog_->term_count_++;
    return &lam;
  }

  Exp build_exp(const Sexpr& form, const Scope& scope) {
    prog_->term_count_++;
    if (form.is_integer()) return Exp::constant(form.integer);
    if (form.is_symbol())
      return Exp::var_ref(resolve(form.symbol, scope, form.pos));
    if (form.head_is("lambda") || form.head_is("kappa")) {
      prog_->term_count_--;  // build_lam counts itself
      return Exp::lam_ref(build_lam(form, scope));
    }
    throw ParseError("expected an atomic expression (variable, lambda, or "
                     "integer)", form.pos);
  }

  const CallSite* build_call(const Sexpr& form, const Scope& scope) {
    if (!form.is_list() || form.items.empty())
      throw ParseError("call site must be a non-empty list", form.pos);
    CallSite& call = prog_->call_arena_.emplace_back();
    call.label = fresh_label();
    call.op = build_exp(form.items[0], scope);
    for (std::size_t i = 1; i < form.items.size(); ++i)
      call.args.push_back(build_exp(form.items[i], scope));
    if (call.op.kind == Exp::Kind::LamRef &&
        call.op.lam->params.size() != call.args.size())
      throw ParseError("literal operator arity mismatch: lambda takes " +
                           std::to_string(call.op.lam->params.size()) +
                           " arguments, call passes " +
                           std::to_string(call.args.size()),
                       form.pos);
    prog_->term_count_++;
    return &call;
  }

  // Index tables and free-variable sets, computed bottom-up over the arena.
  void finalize() {
    CpsProgram& p = *prog_;
    std::size_t n = next_label_;
    p.lam_index_.assign(n, nullptr);
    p.call_index_.assign(n, nullptr);
    p.parent_lam_.assign(n, nullptr);
    p.lam_free_.assign(n, {});
    p.call_free_.assign(n, {});
    for (const Lam& lam : p.lam_arena_) {
      p.lam_index_[lam.label] = &lam;
      p.lam_labels_.push_back(lam.label);
      p.parent_lam_[lam.body->label] = &lam;
    }
    for (const CallSite& call : p.call_arena_) {
      p.call_index_[call.label] = &call;
      p.call_labels_.push_back(call.label);
    }
    std::sort(p.lam_labels_.begin(), p.lam_labels_.end());
    std::sort(p.call_labels_.begin(), p.call_labels_.end());
    p.lam_count_ = p.lam_arena_.size();
    p.call_count_ = p.call_arena_.size();

    compute_free(*p.root_);
    p.root_free_ = p.call_free_[p.root_->label];
    for (VarId v : p.root_free_)
      if (p.vars_[v].name == kHaltName) p.halt_var_ = v;
  }

  std::set<VarId> compute_free(const CallSite& call) {
    std::set<VarId> acc = exp_free(call.op);
    for (const Exp& a : call.args) {
      auto f = exp_free(a);
      acc.insert(f.begin(), f.end());
    }
    prog_->call_free_[call.label].assign(acc.begin(), acc.end());
    return acc;
  }

  std::set<VarId> exp_free(const Exp& e) {
    switch (e.kind) {
      case Exp::Kind::VarRef:
        return {e.var};
      case Exp::Kind::Const:
        return {};
      case Exp::Kind::LamRef: {
        std::set<VarId> f = compute_free(*e.lam->body);
        for (VarId p : e.lam->params) f.erase(p);
        prog_->lam_free_[e.lam->label].assign(f.begin(), f.end());
        return f;
      }
    }
    return {};
  }
};

CpsProgramPtr parse_cps(const std::string& source) {
  return CpsBuilder().build(source);
}

namespace {

void unparse_call(const CpsProgram& p, const CallSite& call, bool verbose,
                  std::string& out);

void unparse_exp(const CpsProgram& p, const Exp& e, bool verbose,
                 std::string& out) {
  switch (e.kind) {
    case Exp::Kind::VarRef:
      out += p.var(e.var).name;
      break;
    case Exp::Kind::Const:
      out += std::to_string(e.value);
      break;
    case Exp::Kind::LamRef: {
      const Lam& lam = *e.lam;
      out += '(';
      out += lam.kind == LamKind::Continuation ? "kappa" : "lambda";
      if (verbose) out += "#" + std::to_string(lam.label);
      out += " (";
      for (std::size_t i = 0; i < lam.params.size(); ++i) {
        if (i) out += ' ';
        out += p.var(lam.params[i]).name;
      }
      out += ") ";
      unparse_call(p, *lam.body, verbose, out);
      out += ')';
      break;
    }
  }
}

void unparse_call(const CpsProgram& p, const CallSite& call, bool verbose,
                  std::string& out) {
  out += '(';
  unparse_exp(p, call.op, verbose, out);
  for (const Exp& a : call.args) {
    out += ' ';
    unparse_exp(p, a, verbose, out);
  }
  out += ')';
  if (verbose) out += "#" + std::to_string(call.label);
}

// Alpha-equivalence walk with a uid bijection built from binder positions.
struct AlphaCmp {
  const CpsProgram& pa;
  const CpsProgram& pb;
  std::map<VarId, VarId> fwd;

  bool vars(VarId a, VarId b) {
    auto it = fwd.find(a);
    if (it != fwd.end()) return it->second == b;
    // Free variables must agree by name.
    return pa.var(a).name == pb.var(b).name;
  }

  bool exps(const Exp& a, const Exp& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
      case Exp::Kind::VarRef:
        return vars(a.var, b.var);
      case Exp::Kind::Const:
        return a.value == b.value;
      case Exp::Kind::LamRef:
        return lams(*a.lam, *b.lam);
    }
    return false;
  }

  bool lams(const Lam& a, const Lam& b) {
    if (a.kind != b.kind || a.params.size() != b.params.size()) return false;
    for (std::size_t i = 0; i < a.params.size(); ++i)
      fwd[a.params[i]] = b.params[i];
    return calls(*a.body, *b.body);
  }

  bool calls(const CallSite& a, const CallSite& b) {
    if (a.args.size() != b.args.size()) return false;
    if (!exps(a.op, b.op)) return false;
    for (std::size_t i = 0; i < a.args.size(); ++i)
      if (!exps(a.args[i], b.args[i])) return false;
    return true;
  }
};

}  // namespace

std::string unparse(const CpsProgram& p, bool verbose) {
  std::string out;
  unparse_call(p, p.root(), verbose, out);
  return out;
}

bool alpha_equivalent(const CpsProgram& a, const CpsProgram& b) {
  AlphaCmp cmp{a, b, {}};
  return cmp.calls(a.root(), b.root());
}

}  // namespace cfa
