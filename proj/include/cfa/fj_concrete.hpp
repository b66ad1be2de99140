#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cfa/cps_concrete.hpp"  // RunError
#include "cfa/fj_ast.hpp"

namespace cfa::fj {

// Abstract (and concrete) addresses pair an offset with a time; offsets are
// variables/fields or methods (methods give continuations a binding point).
struct Offset {
  bool is_method = false;
  std::uint32_t id = 0;  // VarId or MethodId
  auto operator<=>(const Offset&) const = default;

  static Offset var(VarId v) { return Offset{false, v}; }
  static Offset method(MethodId m) { return Offset{true, m}; }
};

// Statement ticking. PerStatement is the literal semantics: time advances at
// every statement. CallSiteOnly is the points-to-style variation: time
// advances only at method invocations, and returns restore the caller's
// time from the continuation.
enum class TickMode { PerStatement, CallSiteOnly };

// ---- Concrete machine ----

// Concrete times are nodes in an arena; every tick makes a fresh node, which
// gives address freshness even for the silent ticks of CallSiteOnly mode.
using CTime = std::uint32_t;

struct CAddr {
  Offset off;
  CTime time = 0;
  auto operator<=>(const CAddr&) const = default;
};

using CBEnv = std::map<VarId, CAddr>;

struct CObj {
  ClassId cls = 0;
  CBEnv record;  // field name -> address
  bool operator==(const CObj&) const = default;
};

struct CKont {
  VarId ret = 0;
  Label next = 0;
  CBEnv env;
  CAddr parent;
  CTime saved_time = 0;  // caller's time, used by CallSiteOnly returns
  bool operator==(const CKont&) const = default;
};

struct CValue {
  enum class Kind { Obj, Kont, Halt };
  Kind kind = Kind::Halt;
  CObj obj;
  CKont kont;

  static CValue object(CObj o) { return CValue{Kind::Obj, std::move(o), {}}; }
  static CValue kontv(CKont k) {
    return CValue{Kind::Kont, {}, std::move(k)};
  }
  static CValue halt() { return CValue{}; }
  bool operator==(const CValue&) const = default;
};

struct FJState {
  Label stmt = 0;
  CBEnv env;
  CAddr kont;
  CTime time = 0;
  std::size_t store_watermark = 0;
};

struct CWrite {
  CAddr addr;
  CValue value;
};

class FjMachine {
 public:
  explicit FjMachine(const FjProgram& program,
                     TickMode mode = TickMode::PerStatement);

  FJState inject();

  struct Halted {
    CValue value;
  };
  std::variant<FJState, Halted> step(const FJState& s);

  const std::vector<CWrite>& writes() const { return writes_; }
  const CValue* store_get(CAddr a) const;
  // Statement labels recorded in a time, most recent first.
  std::vector<Label> time_labels(CTime t, std::size_t max = SIZE_MAX) const;
  const FjProgram& program() const { return prog_; }
  TickMode mode() const { return mode_; }

 private:
  CTime tick(Label stmt_label, CTime t, bool is_invoke);
  CTime restore(CTime saved);
  void store_put(CAddr a, const CValue& v, bool must_be_fresh);
  const CValue& store_at(CAddr a, const char* what) const;

  const FjProgram& prog_;
  TickMode mode_;
  struct TimeNode {
    Label head = 0;
    CTime parent = 0;
    std::uint32_t len = 0;
    bool adds_label = false;
  };
  std::vector<TimeNode> time_nodes_;
  std::map<CAddr, CValue> store_;
  std::vector<CWrite> writes_;
};

struct FjRunResult {
  std::vector<FJState> states;
  std::optional<CValue> halt_value;
  bool budget_exhausted = false;
  std::size_t steps = 0;
};

FjRunResult run_fj(FjMachine& m, std::size_t max_steps);

/// Line-per-state trace dump (label, focused classes, time length).
std::string dump_trace(const FjProgram& p, const FjMachine& m,
                       const FjRunResult& r);

}  // namespace cfa::fj
