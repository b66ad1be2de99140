#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cfa/sexpr.hpp"

namespace cfa {

// Dense node index shared by lambda terms and call sites; assigned in
// preorder starting at 0.
using Label = std::uint32_t;

// Identity of a binding occurrence after alpha-renaming. Two occurrences of
// the same source name bound by different binders get different uids.
using VarId = std::uint32_t;

enum class LamKind { Procedure, Continuation };

struct CallSite;
struct Lam;

// Atomic expression: variable reference, literal lambda, or integer constant.
// Integer constants are opaque values; they evaluate to themselves.
struct Exp {
  enum class Kind { VarRef, LamRef, Const };

  Kind kind = Kind::VarRef;
  VarId var = 0;
  const Lam* lam = nullptr;
  std::int64_t value = 0;

  static Exp var_ref(VarId v) {
    Exp e;
    e.kind = Kind::VarRef;
    e.var = v;
    return e;
  }
  static Exp lam_ref(const Lam* l) {
    Exp e;
    e.kind = Kind::LamRef;
    e.lam = l;
    return e;
  }
  static Exp constant(std::int64_t c) {
    Exp e;
    e.kind = Kind::Const;
    e.value = c;
    return e;
  }
};

struct Lam {
  Label label = 0;
  LamKind kind = LamKind::Procedure;
  std::vector<VarId> params;
  const CallSite* body = nullptr;
};

struct CallSite {
  Label label = 0;
  Exp op;
  std::vector<Exp> args;
};

struct VarInfo {
  std::string name;
  VarId uid = 0;
};

// The variable name reserved for the program's halt continuation. It may
// appear free at the root; machines bind it to the halt value at injection.
inline constexpr const char* kHaltName = "halt";

/// A parsed, labeled, alpha-renamed CPS program. Immutable after parse; safe
/// to share across concurrent analysis runs.
class CpsProgram {
 public:
  const CallSite& root() const { return *root_; }

  std::size_t label_count() const { return lam_index_.size(); }
  std::size_t lambda_count() const { return lam_count_; }
  std::size_t call_count() const { return call_count_; }

  // nullptr when the label names the other node class.
  const Lam* lam_at(Label l) const {
    return l < lam_index_.size() ? lam_index_[l] : nullptr;
  }
  const CallSite* call_at(Label l) const {
    return l < call_index_.size() ? call_index_[l] : nullptr;
  }

  // Free variables, sorted by uid. For a call site this means the variables
  // occurring free anywhere in the call (including inside literal lambdas).
  const std::vector<VarId>& free_vars(const Lam& lam) const {
    return lam_free_[lam.label];
  }
  const std::vector<VarId>& free_vars(const CallSite& call) const {
    return call_free_[call.label];
  }

  // Variables free at the root; contains at most `halt` for a well-formed
  // closed program.
  const std::vector<VarId>& root_free_vars() const { return root_free_; }

  // The uid of a free occurrence of `halt`, when the program references it.
  std::optional<VarId> halt_var() const { return halt_var_; }

  const VarInfo& var(VarId v) const { return vars_[v]; }
  std::size_t var_count() const { return vars_.size(); }
  // "name.uid", unambiguous across alpha-renamed binders.
  std::string var_display(VarId v) const {
    return vars_[v].name + "." + std::to_string(v);
  }

  // Total number of AST nodes (lambdas, call sites, and atomic expressions);
  // the size measure used in benchmark output.
  std::size_t term_count() const { return term_count_; }

  // Enclosing lambda of a call site (the lambda whose body it is), or
  // nullptr for the root call.
  const Lam* parent_lambda(const CallSite& call) const {
    return parent_lam_[call.label];
  }

  // All lambda labels in increasing order.
  const std::vector<Label>& lambda_labels() const { return lam_labels_; }
  const std::vector<Label>& call_labels() const { return call_labels_; }

 private:
  friend class CpsBuilder;

  std::deque<Lam> lam_arena_;
  std::deque<CallSite> call_arena_;
  const CallSite* root_ = nullptr;
  std::vector<const Lam*> lam_index_;
  std::vector<const CallSite*> call_index_;
  std::vector<const Lam*> parent_lam_;
  std::vector<std::vector<VarId>> lam_free_;
  std::vector<std::vector<VarId>> call_free_;
  std::vector<VarId> root_free_;
  std::optional<VarId> halt_var_;
  std::vector<VarInfo> vars_;
  std::vector<Label> lam_labels_;
  std::vector<Label> call_labels_;
  std::size_t lam_count_ = 0;
  std::size_t call_count_ = 0;
  std::size_t term_count_ = 0;
};

using CpsProgramPtr = std::shared_ptr<const CpsProgram>;

/// Parses CPS source. Keywords: `lambda` introduces a procedure, `kappa` a
/// continuation. The root form must be a call site. Labels are assigned in
/// preorder; every binder is alpha-renamed to a fresh uid.
CpsProgramPtr parse_cps(const std::string& source);

/// Canonical source form; reparses to an alpha-equivalent program. With
/// `verbose`, nodes carry `#label` annotations (not reparseable).
std::string unparse(const CpsProgram& p, bool verbose = false);

/// Structural equality modulo choice of uids (binder correspondence).
bool alpha_equivalent(const CpsProgram& a, const CpsProgram& b);

}  // namespace cfa
