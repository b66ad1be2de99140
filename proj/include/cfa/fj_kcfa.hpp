#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "cfa/fj_ast.hpp"
#include "cfa/fj_concrete.hpp"
#include "cfa/flow_report.hpp"
#include "cfa/worklist.hpp"

namespace cfa::fj {

using TimeId = std::uint32_t;  // interned statement-label list, length <= k
using EnvId = std::uint32_t;

struct AAddr {
  Offset off;
  TimeId time = 0;
  auto operator<=>(const AAddr&) const = default;
};

// Binding environments come in two interchangeable representations. The map
// form is the standard Var -> Addr function. The collapsed form exploits the
// flat-record property: all non-this bindings share one allocation time, so
// the time (plus the receiver address, whose binding predates the call)
// represents the whole environment. `time` is absent when the environment
// has no timed slots at all, which keeps the two forms equally coarse.
struct EnvMap {
  std::vector<std::pair<VarId, AAddr>> bindings;  // sorted by var
  auto operator<=>(const EnvMap&) const = default;
};
struct EnvCollapsed {
  std::optional<TimeId> time;
  std::optional<AAddr> this_addr;
  auto operator<=>(const EnvCollapsed&) const = default;
};
using EnvRep = std::variant<EnvMap, EnvCollapsed>;

enum class EnvMode { Map, Collapsed };

class FjPool {
 public:
  FjPool();

  TimeId empty_time() const { return 0; }
  TimeId intern_time(std::vector<Label> labels);
  const std::vector<Label>& time(TimeId t) const { return times_[t]; }

  EnvId intern_env(EnvRep rep);
  const EnvRep& env(EnvId e) const { return envs_[e]; }

 private:
  std::map<std::vector<Label>, TimeId> time_ids_;
  std::vector<std::vector<Label>> times_;
  std::map<EnvRep, EnvId> env_ids_;
  std::vector<EnvRep> envs_;
};

struct AVal {
  enum class Kind : std::uint8_t { HaltKont, Obj, Kont };
  Kind kind = Kind::HaltKont;
  // Obj
  ClassId cls = 0;
  EnvId record = 0;
  // Kont
  VarId ret = 0;
  Label next = 0;
  EnvId env = 0;
  AAddr parent{};
  // Caller time for CallSiteOnly returns; nullopt (encoded distinctly) in
  // PerStatement mode so continuation identity stays the plain 4-tuple.
  std::optional<TimeId> saved;

  static AVal halt() { return {}; }
  static AVal object(ClassId c, EnvId rec) {
    AVal v;
    v.kind = Kind::Obj;
    v.cls = c;
    v.record = rec;
    return v;
  }
  static AVal kont(VarId ret, Label next, EnvId env, AAddr parent,
                   std::optional<TimeId> saved) {
    AVal v;
    v.kind = Kind::Kont;
    v.ret = ret;
    v.next = next;
    v.env = env;
    v.parent = parent;
    v.saved = saved;
    return v;
  }
  auto operator<=>(const AVal&) const = default;
};

using Flow = std::set<AVal>;
using Store = JoinStore<AAddr, AVal>;

struct Config {
  Label stmt = 0;
  EnvId env = 0;
  AAddr kont{};
  TimeId time = 0;
  auto operator<=>(const Config&) const = default;
};

struct Options {
  unsigned k = 0;
  EnvMode env_mode = EnvMode::Map;
  TickMode tick_mode = TickMode::PerStatement;
  bool strict_cast = false;  // filter cast flow by subclass when on
};

TimeId atick(FjPool& pool, Label stmt, TimeId t, unsigned k);
inline AAddr aalloc(VarId v, TimeId t) { return AAddr{Offset::var(v), t}; }
inline AAddr aalloc_kappa(MethodId m, TimeId t) {
  return AAddr{Offset::method(m), t};
}

/// Environment lookup under either representation.
std::optional<AAddr> env_lookup(const FjProgram& p, const FjPool& pool,
                                EnvId env, VarId v);

using Outcome = StepOutcome<Config, AAddr, AVal>;

Outcome astep_fj(const FjProgram& p, FjPool& pool, const Options& opts,
                 const Config& c, const Store& store);

struct Result {
  FjPool pool;
  std::set<Config> configs;
  Store store;
  Flow final_flow;
  EngineMetrics metrics;
  Options opts;
};

Result explore_widened_fj(const FjProgram& p, const Options& opts,
                          const EngineOptions& engine = {});

bool widened_is_fixpoint(const FjProgram& p, Result& r);

// Canonical renderings; identical for both env representations.
std::string time_str(const FjPool& pool, TimeId t);
std::string addr_str(const FjProgram& p, const FjPool& pool, AAddr a);
std::string env_str(const FjProgram& p, const FjPool& pool, EnvId e);
std::string aval_str(const FjProgram& p, const FjPool& pool, const AVal& v);

FlowReport build_report(const FjProgram& p, Result& r);

/// The enabling fact for the collapsed representation: every reachable
/// map-form environment and object record binds all its non-this slots at
/// one shared time.
bool check_flat_record_invariant(const FjProgram& p, const Result& r,
                                 std::string* violation = nullptr);

/// Distinct abstract receiver objects flowing into a method's entry
/// configurations. Object records are the FJ analogue of the environments
/// closing a lambda, so this is the OO-side context count.
std::size_t count_receiver_objects(const FjProgram& p, const Result& r,
                                   Label method_entry);

struct SimulationCheck {
  bool ok = true;
  std::size_t states_checked = 0;
  std::size_t concrete_steps = 0;
  std::string first_violation;
};

SimulationCheck check_simulation_fj(const FjProgram& p, const Options& opts,
                                    std::size_t max_steps);

}  // namespace cfa::fj
