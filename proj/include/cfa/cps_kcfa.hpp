#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cfa/cps_ast.hpp"
#include "cfa/cps_concrete.hpp"
#include "cfa/flow_report.hpp"
#include "cfa/worklist.hpp"

namespace cfa::kcfa {

// Interned abstract times (call-site label lists of length <= k) and
// abstract binding environments. Since alloc(v, t) = (v, t), an environment
// is a map from variables to just times.
using TimeId = std::uint32_t;
using EnvId = std::uint32_t;

class DomainPool {
 public:
  DomainPool();

  TimeId empty_time() const { return 0; }
  EnvId empty_env() const { return 0; }

  TimeId intern_time(std::vector<Label> labels);
  const std::vector<Label>& time(TimeId t) const { return times_[t]; }

  using EnvBindings = std::vector<std::pair<VarId, TimeId>>;  // sorted by var
  EnvId intern_env(EnvBindings bindings);
  const EnvBindings& env(EnvId e) const { return envs_[e]; }
  std::optional<TimeId> env_lookup(EnvId e, VarId v) const;

 private:
  std::map<std::vector<Label>, TimeId> time_ids_;
  std::vector<std::vector<Label>> times_;
  std::map<EnvBindings, EnvId> env_ids_;
  std::vector<EnvBindings> envs_;
};

struct Addr {
  VarId var = 0;
  TimeId time = 0;
  auto operator<=>(const Addr&) const = default;
};

struct AVal {
  enum class Kind : std::uint8_t { Halt, Int, Clo };
  Kind kind = Kind::Halt;
  Label lam = 0;
  EnvId env = 0;
  std::int64_t value = 0;

  static AVal halt() { return {}; }
  static AVal constant(std::int64_t v) {
    return AVal{Kind::Int, 0, 0, v};
  }
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
  TimeId time = 0;
  auto operator<=>(const Config&) const = default;
};

// t̂ick(call, t̂) = first_k(call : t̂); the polyvariance allocator pairs the
// variable with the binding time.
TimeId atick(DomainPool& pool, Label call, TimeId t, unsigned k);
inline Addr aalloc(VarId v, TimeId t) { return Addr{v, t}; }

using Outcome = StepOutcome<Config, Addr, AVal>;

/// The non-deterministic abstract transition: one successor per abstract
/// closure of the operator, parameter bindings joined into the store.
Outcome astep(const CpsProgram& p, DomainPool& pool, unsigned k,
              const Config& c, const Store& store);

/// Abstract evaluation of an atomic expression under a config's environment.
Flow aeval(const CpsProgram& p, DomainPool& pool, const Exp& e, EnvId env,
           const Store& store);

// An abstract machine state: the (call, env, time) focus plus a store. The
// naive exploration works over these directly; the abstraction map produces
// one from a concrete state.
struct AState {
  Config config;
  Store store;
  auto operator<=>(const AState&) const = default;
};

// --- Abstraction map (concrete machine must run with call-string times) ---

class Abstraction {
 public:
  Abstraction(const CpsProgram& p, const cps::Machine& m, DomainPool& pool,
              unsigned k)
      : prog_(p), machine_(m), pool_(pool), k_(k) {}

  TimeId time(cps::Time t) const;
  Addr addr(cps::Addr a) const;
  EnvId env(const cps::BEnv& env) const;
  AVal value(const cps::Value& v) const;
  Config config(const cps::State& s) const;
  // alpha(sigma): group concrete addresses by their abstraction and join.
  Store store(const std::vector<cps::Write>& writes,
              std::size_t watermark) const;
  // Whole-state abstraction over the store prefix the state observed.
  AState state(const cps::State& s,
               const std::vector<cps::Write>& writes) const;

 private:
  const CpsProgram& prog_;
  const cps::Machine& machine_;
  DomainPool& pool_;
  unsigned k_;
};

// --- Naive exploration (set-of-states semantics) ---

struct NaiveResult {
  std::set<AState> states;
  std::size_t iterations = 0;
  bool fixpoint_reached = false;
  bool budget_exceeded = false;
};

/// Reachable abstract states, each carrying its own store. Deeply
/// exponential; `state_budget` caps the explored set. The pool overload
/// allows id-level comparison against a widened run over the same pool.
NaiveResult explore_naive(const CpsProgram& p, unsigned k, DomainPool& pool,
                          std::size_t state_budget = 1000000);
NaiveResult explore_naive(const CpsProgram& p, unsigned k,
                          std::size_t state_budget = 1000000);

// --- Widened (single-threaded store) exploration ---

struct Result {
  DomainPool pool;
  std::set<Config> configs;
  Store store;
  Flow final_flow;
  EngineMetrics metrics;
  unsigned k = 0;
};

Result explore_widened(const CpsProgram& p, unsigned k,
                       const EngineOptions& opts = {});
WidenedSpace<Config, Addr, AVal> explore_widened_core(
    const CpsProgram& p, unsigned k, DomainPool& pool,
    const EngineOptions& opts = {});

/// One extra transfer application changes nothing.
bool widened_is_fixpoint(const CpsProgram& p, Result& r);

// --- Rendering / reporting ---

std::string time_str(const DomainPool& pool, TimeId t);
std::string addr_str(const CpsProgram& p, const DomainPool& pool, Addr a);
std::string env_str(const CpsProgram& p, const DomainPool& pool, EnvId e);
std::string aval_str(const CpsProgram& p, const DomainPool& pool,
                     const AVal& v);

FlowReport build_report(const CpsProgram& p, Result& r);

struct SimulationCheck {
  bool ok = true;
  std::size_t states_checked = 0;
  std::size_t concrete_steps = 0;
  std::string first_violation;
};

/// Theorem 1 as a test: every state of a bounded concrete trace (call-string
/// times) abstracts into the widened result — its config is present and its
/// abstracted store is pointwise subsumed by the global store.
SimulationCheck check_simulation(const CpsProgram& p, unsigned k,
                                 std::size_t max_steps);

}  // namespace cfa::kcfa
