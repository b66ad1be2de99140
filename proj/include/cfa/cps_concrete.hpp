#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cfa/cps_ast.hpp"

namespace cfa {

/// Machine-level runtime error with a stable kind for tests to match on.
class RunError : public std::runtime_error {
 public:
  enum class Kind {
    UnboundVariable,
    NotAClosure,
    ArityMismatch,
    DispatchFailure,
    UnboundField,
    InternalInvariant,
  };

  RunError(Kind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

namespace cps {

// Time-stamp representation. `Counter` is the obvious natural-number
// solution; `CallString` records the full call-site history so that the
// k-CFA abstraction map is a syntactic truncation.
enum class TimeMode { Counter, CallString };

// Times are identified by their strictly increasing serial; in CallString
// mode the machine keeps a side table from serial to the label list.
using Time = std::uint64_t;

struct Addr {
  VarId var = 0;
  Time time = 0;
  auto operator<=>(const Addr&) const = default;
};

using BEnv = std::map<VarId, Addr>;

struct Clo {
  const Lam* lam = nullptr;
  BEnv env;  // restricted to free_vars(lam)
  bool operator==(const Clo&) const = default;
};

struct Value {
  enum class Kind { Clo, Int, Halt };
  Kind kind = Kind::Halt;
  Clo clo;
  std::int64_t value = 0;

  static Value closure(Clo c) { return Value{Kind::Clo, std::move(c), 0}; }
  static Value constant(std::int64_t v) { return Value{Kind::Int, {}, v}; }
  static Value halt() { return Value{Kind::Halt, {}, 0}; }
  bool operator==(const Value&) const = default;
};

struct State {
  const CallSite* call = nullptr;
  BEnv env;
  Time time = 0;
  // Number of store writes performed before this state was reached; the
  // store of this state is exactly that prefix of the write log.
  std::size_t store_watermark = 0;
};

struct Write {
  Addr addr;
  Value value;
};

struct RunResult {
  std::vector<State> states;  // trace, starting with the injected state
  std::vector<Write> writes;  // store write log, extension-only
  std::optional<Value> halt_value;
  bool budget_exhausted = false;
  std::size_t steps = 0;
};

/// The concrete small-step CPS machine. One instance per run; owns the store
/// and the time table. The `halt` variable, when the program references it,
/// is bound to the halt continuation value at injection.
class Machine {
 public:
  Machine(const CpsProgram& program, TimeMode mode = TimeMode::Counter);

  const CpsProgram& program() const { return prog_; }
  TimeMode mode() const { return mode_; }

  State inject();

  // E(e, beta, sigma): variable lookup, closure creation, constants.
  Value eval_atom(const Exp& e, const BEnv& env) const;

  // tick/alloc as external parameters of the semantics. tick strictly
  // increases; alloc pairs the variable with the time.
  Time tick(const CallSite& call, Time t);
  static Addr alloc(VarId v, Time t) { return Addr{v, t}; }

  // Call-site labels of a time, most recent first (CallString mode only).
  std::vector<Label> time_labels(Time t, std::size_t max = SIZE_MAX) const;

  struct Halted {
    Value value;
  };
  // The single transition rule. Throws RunError on stuck states.
  std::variant<State, Halted> step(const State& s);

  const std::vector<Write>& writes() const { return writes_; }
  const Value* store_get(Addr a) const;

 private:
  void store_put(Addr a, Value v);

  const CpsProgram& prog_;
  TimeMode mode_;
  std::map<Addr, Value> store_;
  std::vector<Write> writes_;
  // CallString mode: serial -> (most recent label, previous serial, length);
  // serial 0 is the empty history.
  struct TimeNode {
    Label head = 0;
    Time prev = 0;
    std::uint32_t len = 0;
  };
  std::vector<TimeNode> time_nodes_;
};

/// Runs the deterministic trace from injection for at most `max_steps`
/// transitions. Machine errors propagate as RunError.
RunResult run_concrete(const CpsProgram& program, std::size_t max_steps,
                       TimeMode mode = TimeMode::Counter);

/// Line-per-state text dump (label, env fingerprint, time) for golden tests.
std::string dump_trace(const CpsProgram& program, const RunResult& r);

std::string value_display(const CpsProgram& p, const Value& v);

}  // namespace cps
}  // namespace cfa
