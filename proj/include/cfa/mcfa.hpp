#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "cfa/cps_ast.hpp"
#include "cfa/cps_concrete.hpp"
#include "cfa/flow_report.hpp"
#include "cfa/worklist.hpp"

namespace cfa::mcfa {

// Context allocation policy for the flat-environment abstract machine.
// TopMFrames is m-CFA proper: push a frame on procedure entry, restore the
// closure's environment on continuation entry. LastKCalls pushes on every
// call, which makes the flat analysis degenerate toward 0CFA in practice.
enum class Policy { TopMFrames, LastKCalls };

inline const char* policy_name(Policy p) {
  return p == Policy::TopMFrames ? "top-m-frames" : "last-k-calls";
}

// ---- Concrete flat-closure machine (environments are base addresses) ----

// A concrete environment is a fresh serial plus a frame list; the serial
// keeps every allocation distinct. Frame lists are shared cons cells so
// deep recursion stays linear in space.
struct CEnv {
  std::uint64_t serial = 0;
  std::uint32_t frames_node = 0;
};

struct CAddr {
  VarId var = 0;
  std::uint64_t env_serial = 0;
  auto operator<=>(const CAddr&) const = default;
};

struct CClo {
  const Lam* lam = nullptr;
  std::uint64_t env_serial = 0;
  bool operator==(const CClo&) const = default;
};

struct CValue {
  enum class Kind { Clo, Int, Halt };
  Kind kind = Kind::Halt;
  CClo clo;
  std::int64_t value = 0;

  static CValue closure(CClo c) { return CValue{Kind::Clo, c, 0}; }
  static CValue constant(std::int64_t v) { return CValue{Kind::Int, {}, v}; }
  static CValue halt() { return CValue{Kind::Halt, {}, 0}; }
  bool operator==(const CValue&) const = default;
};

struct CState {
  const CallSite* call = nullptr;
  std::uint64_t env_serial = 0;
  std::size_t store_watermark = 0;
};

struct CWrite {
  CAddr addr;
  CValue value;
};

/// Concrete machine with flat closures: invoking a lambda allocates a fresh
/// environment, binds the parameters, and copies every free variable of the
/// lambda from the closure's environment into the new one. The allocator
/// mirrors the abstract policy so each abstract allocator simulates its
/// concrete counterpart: TopMFrames restores the closure's frames on
/// continuation entry, LastKCalls pushes the call site unconditionally.
class FlatMachine {
 public:
  explicit FlatMachine(const CpsProgram& program,
                       Policy policy = Policy::TopMFrames);

  CState inject();

  // new(call, rho, lam, rho'): fresh serial; procedures push the call site
  // onto the invoker's frames, continuations restore the closure's frames.
  std::uint64_t new_env(const CallSite& call, std::uint64_t invoker_env,
                        const Lam& lam, std::uint64_t closure_env);

  // Frame list of an environment, most recent first, truncated to `max`.
  std::vector<Label> frames(std::uint64_t serial,
                            std::size_t max = SIZE_MAX) const;

  CValue eval_atom(const Exp& e, std::uint64_t env_serial) const;

  struct Halted {
    CValue value;
  };
  std::variant<CState, Halted> step(const CState& s);

  const std::vector<CWrite>& writes() const { return writes_; }
  const CValue* store_get(CAddr a) const;
  const CpsProgram& program() const { return prog_; }

 private:
  void store_put(CAddr a, const CValue& v);

  const CpsProgram& prog_;
  Policy policy_;
  struct FrameNode {
    Label head = 0;
    std::uint32_t parent = 0;
    std::uint32_t len = 0;
  };
  std::vector<CEnv> envs_;  // indexed by serial
  std::vector<FrameNode> frame_nodes_;
  std::map<CAddr, CValue> store_;
  std::vector<CWrite> writes_;
};

struct FlatRunResult {
  std::vector<CState> states;
  std::optional<CValue> halt_value;
  bool budget_exhausted = false;
  std::size_t steps = 0;
};

FlatRunResult run_flat(FlatMachine& m, std::size_t max_steps);

// ---- Abstract m-CFA machine ----

// Abstract environments are frame lists of length <= m, interned.
using EnvId = std::uint32_t;

class EnvPool {
 public:
  EnvPool();
  EnvId empty() const { return 0; }
  EnvId intern(std::vector<Label> frames);
  const std::vector<Label>& frames(EnvId e) const { return envs_[e]; }

 private:
  std::map<std::vector<Label>, EnvId> ids_;
  std::vector<std::vector<Label>> envs_;
};

struct Addr {
  VarId var = 0;
  EnvId env = 0;
  auto operator<=>(const Addr&) const = default;
};

struct AVal {
  enum class Kind : std::uint8_t { Halt, Int, Clo };
  Kind kind = Kind::Halt;
  Label lam = 0;
  EnvId env = 0;
  std::int64_t value = 0;

  static AVal halt() { return {}; }
  static AVal constant(std::int64_t v) { return AVal{Kind::Int, 0, 0, v}; }
  static AVal closure(Label lam, EnvId env) {
    return AVal{Kind::Clo, lam, env, 0};
  }
  auto operator<=>(const AVal&) const = default;
};

using Flow = std::set<AVal>;
using Store = JoinStore<Addr, AVal>;

struct Config {
  Label call = 0;
  EnvId env = 0;
  auto operator<=>(const Config&) const = default;
};

/// n̂ew: the abstract environment allocator, parameterized by policy.
EnvId new_env_abstract(EnvPool& pool, Label call, EnvId invoker_env,
                       LamKind lam_kind, EnvId closure_env, unsigned m,
                       Policy policy);

using Outcome = StepOutcome<Config, Addr, AVal>;

Outcome astep(const CpsProgram& p, EnvPool& pool, unsigned m, Policy policy,
              const Config& c, const Store& store);

struct Result {
  EnvPool pool;
  std::set<Config> configs;
  Store store;
  Flow final_flow;
  EngineMetrics metrics;
  unsigned m = 0;
  Policy policy = Policy::TopMFrames;
};

Result explore_widened(const CpsProgram& p, unsigned m, Policy policy,
                       const EngineOptions& opts = {});

bool widened_is_fixpoint(const CpsProgram& p, Result& r);

std::string env_str(const EnvPool& pool, EnvId e);
std::string aval_str(const AVal& v);

FlowReport build_report(const CpsProgram& p, Result& r);

/// Flat-environment contract: for every closure (lam, rho) in any flow set,
/// every free variable of lam has an entry at (x, rho) in the store.
bool check_flat_contract(const CpsProgram& p, const Result& r,
                         std::string* violation = nullptr);

struct SimulationCheck {
  bool ok = true;
  std::size_t states_checked = 0;
  std::size_t concrete_steps = 0;
  std::string first_violation;
};

/// Soundness against the concrete flat machine under
/// alpha((n, frames)) = first_m(frames).
SimulationCheck check_simulation(const CpsProgram& p, unsigned m,
                                 Policy policy, std::size_t max_steps);

}  // namespace cfa::mcfa
