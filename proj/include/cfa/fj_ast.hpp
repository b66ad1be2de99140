#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cfa/sexpr.hpp"

namespace cfa::fj {

using Label = std::uint32_t;    // dense statement label
using VarId = std::uint32_t;    // locals/params per declaration; fields and
                                // `this` by name program-wide
using ClassId = std::uint32_t;
using MethodId = std::uint32_t;

enum class ExprKind { Var, FieldRead, Invoke, New, Cast };

struct Expr {
  ExprKind kind = ExprKind::Var;
  VarId v0 = 0;                // source variable (Var/FieldRead/Invoke/Cast)
  VarId field = 0;             // FieldRead
  std::string method;          // Invoke
  std::vector<VarId> args;     // Invoke / New
  ClassId cls = 0;             // New / Cast
};

enum class StmtKind { Assign, Return };

struct Stmt {
  Label label = 0;
  StmtKind kind = StmtKind::Assign;
  VarId target = 0;  // Assign
  Expr expr;         // Assign
  VarId ret = 0;     // Return
  MethodId owner = 0;
  SourcePos pos;
};

struct MethodDecl {
  MethodId id = 0;
  ClassId owner = 0;  // class declaring it; the synthetic main has none
  std::string name;
  std::string ret_type;
  std::vector<VarId> params;
  std::vector<VarId> locals;
  Label entry = 0;      // label of the first body statement
  Label last = 0;       // label of the final (return) statement
  bool is_main = false;
};

// Constructor: parameter list plus a routing plan resolved at parse time.
// Field i of the full (inherited-first) field vector receives the value of
// constructor parameter `field_source[i]`.
struct Konst {
  std::vector<VarId> params;       // constructor parameter field names
  std::vector<std::string> param_types;
  std::vector<std::size_t> field_source;
};

struct ClassDecl {
  ClassId id = 0;
  std::string name;
  std::optional<ClassId> parent;  // none for Object
  std::vector<VarId> own_fields;
  std::vector<std::string> own_field_types;
  Konst ctor;
  std::map<std::string, MethodId> methods;  // declared here only
};

/// Parsed A-Normal Featherweight Java program: class table, method bodies as
/// labeled statements with a successor map, and a main statement block.
/// Immutable after parse.
class FjProgram {
 public:
  // --- classes ---
  const std::vector<ClassDecl>& classes() const { return classes_; }
  const ClassDecl& cls(ClassId id) const { return classes_[id]; }
  std::optional<ClassId> class_named(const std::string& name) const;
  ClassId object_class() const { return 0; }
  bool is_subclass(ClassId sub, ClassId super) const;

  // Full field vector of a class, inherited fields first.
  const std::vector<VarId>& field_vector(ClassId id) const {
    return field_vectors_[id];
  }
  // Field names and the constructor routing plan together; field i of the
  // vector receives constructor argument ctor.field_source[i].
  std::pair<const std::vector<VarId>*, const Konst*> constructor_lookup(
      ClassId id) const {
    return {&field_vectors_[id], &classes_[id].ctor};
  }

  // --- methods ---
  const std::vector<MethodDecl>& methods() const { return methods_; }
  const MethodDecl& method(MethodId id) const { return methods_[id]; }
  const MethodDecl& main() const { return methods_[main_id_]; }
  // Dynamic dispatch: walk the chain from `c` upward.
  std::optional<MethodId> dispatch(ClassId c, const std::string& m) const;

  // --- statements ---
  const Stmt& stmt(Label l) const { return stmts_[l]; }
  std::size_t stmt_count() const { return stmts_.size(); }
  // Defined exactly on non-return labels.
  std::optional<Label> succ(Label l) const { return succ_[l]; }

  // --- variables ---
  const std::string& var_name(VarId v) const { return var_names_[v]; }
  std::string var_display(VarId v) const {
    return var_names_[v] + "." + std::to_string(v);
  }
  VarId this_var() const { return this_var_; }
  std::size_t var_count() const { return var_names_.size(); }

  std::size_t term_count() const { return term_count_; }

  std::string method_display(MethodId id) const;

 private:
  friend class FjBuilder;

  std::vector<ClassDecl> classes_;
  std::vector<std::vector<VarId>> field_vectors_;
  std::vector<MethodDecl> methods_;
  MethodId main_id_ = 0;
  std::vector<Stmt> stmts_;
  std::vector<std::optional<Label>> succ_;
  std::vector<std::string> var_names_;
  VarId this_var_ = 0;
  std::size_t term_count_ = 0;
};

using FjProgramPtr = std::shared_ptr<const FjProgram>;

/// Parses the Java-like concrete syntax:
///
///   class C extends D { T f; ... C(T f, ...) { super(f, ...); this.f = f; }
///     T m(T v, ...) { T w; ... stmts } }
///   main { T v; ... stmts }
///
/// Statements are `v = e;`, `T v = e;` (declaration sugar), and
/// `return v;`; expressions are limited to the A-normal forms
/// v, v.f, v.m(v...), new C(v...), (C) v.
FjProgramPtr parse_fj(const std::string& source);

}  // namespace cfa::fj
