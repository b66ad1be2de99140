#include "cfa/cps_kcfa.hpp"

#include <algorithm>

namespace cfa::kcfa {

DomainPool::DomainPool() {
  times_.emplace_back();
  time_ids_.emplace(std::vector<Label>{}, 0);
  envs_.emplace_back();
  env_ids_.emplace(EnvBindings{}, 0);
}

TimeId DomainPool::intern_time(std::vector<Label> labels) {
  auto it = time_ids_.find(labels);
  if (it != time_ids_.end()) return it->second;
  TimeId id = static_cast<TimeId>(times_.size());
  times_.push_back(labels);
  time_ids_.emplace(std::move(labels), id);
  return id;
}

EnvId DomainPool::intern_env(EnvBindings bindings) {
  auto it = env_ids_.find(bindings);
  if (it != env_ids_.end()) return it->second;
  EnvId id = static_cast<EnvId>(envs_.size());
  envs_.push_back(bindings);
  env_ids_.emplace(std::move(bindings), id);
  return id;
}

std::optional<TimeId> DomainPool::env_lookup(EnvId e, VarId v) const {
  const EnvBindings& b = envs_[e];
  auto it = std::lower_bound(
      b.begin(), b.end(), v,
      [](const std::pair<VarId, TimeId>& p, VarId v) { return p.first < v; });
  if (it != b.end() && it->first == v) return it->second;
  return std::nullopt;
}

TimeId atick(DomainPool& pool, Label call, TimeId t, unsigned k) {
  if (k == 0) return pool.empty_time();
  const std::vector<Label>& old = pool.time(t);
  std::vector<Label> next;
  next.reserve(k);
  next.push_back(call);
  for (std::size_t i = 0; i + 1 < k && i < old.size(); ++i)
    next.push_back(old[i]);
  return pool.intern_time(std::move(next));
}

namespace {

// Restricts env bindings to a sorted variable list (both sides sorted).
DomainPool::EnvBindings restrict_bindings(const DomainPool::EnvBindings& env,
                                          const std::vector<VarId>& keep) {
  DomainPool::EnvBindings out;
  auto ei = env.begin();
  for (VarId v : keep) {
    while (ei != env.end() && ei->first < v) ++ei;
    if (ei != env.end() && ei->first == v) out.emplace_back(v, ei->second);
  }
  return out;
}

}  // namespace

Flow aeval(const CpsProgram& p, DomainPool& pool, const Exp& e, EnvId env,
           const Store& store) {
  switch (e.kind) {
    case Exp::Kind::VarRef: {
      auto t = pool.env_lookup(env, e.var);
      if (!t) return {};
      return store.at(aalloc(e.var, *t));
    }
    case Exp::Kind::LamRef: {
      EnvId captured = pool.intern_env(
          restrict_bindings(pool.env(env), p.free_vars(*e.lam)));
      return {AVal::closure(e.lam->label, captured)};
    }
    case Exp::Kind::Const:
      return {AVal::constant(e.value)};
  }
  return {};
}

Outcome astep(const CpsProgram& p, DomainPool& pool, unsigned k,
              const Config& c, const Store& store) {
  Outcome out;
  const CallSite& call = *p.call_at(c.call);

  auto record_read = [&](const Exp& e) {
    if (e.kind == Exp::Kind::VarRef) {
      if (auto t = pool.env_lookup(c.env, e.var))
        out.reads.push_back(aalloc(e.var, *t));
    }
  };
  record_read(call.op);
  for (const Exp& a : call.args) record_read(a);

  Flow f_flow = aeval(p, pool, call.op, c.env, store);
  std::vector<Flow> arg_flows;
  arg_flows.reserve(call.args.size());
  for (const Exp& a : call.args)
    arg_flows.push_back(aeval(p, pool, a, c.env, store));

  for (const AVal& f : f_flow) {
    if (f.kind == AVal::Kind::Halt) {
      if (arg_flows.size() == 1)
        out.halt_flow.insert(arg_flows[0].begin(), arg_flows[0].end());
      continue;
    }
    if (f.kind != AVal::Kind::Clo) continue;  // constants are not applicable
    const Lam& lam = *p.lam_at(f.lam);
    if (lam.params.size() != arg_flows.size()) continue;

    TimeId t2 = atick(pool, call.label, c.time, k);
    DomainPool::EnvBindings env2 = pool.env(f.env);
    Successor<Config, Addr, AVal> succ;
    for (std::size_t i = 0; i < lam.params.size(); ++i) {
      Addr a = aalloc(lam.params[i], t2);
      succ.writes.emplace_back(a, arg_flows[i]);
      // params are fresh uids, absent from the closure env; keep sorted
      auto pos = std::lower_bound(
          env2.begin(), env2.end(), lam.params[i],
          [](const std::pair<VarId, TimeId>& b, VarId v) {
            return b.first < v;
          });
      env2.insert(pos, {lam.params[i], t2});
    }
    EnvId body_env = pool.intern_env(
        restrict_bindings(env2, p.free_vars(*lam.body)));
    succ.config = Config{lam.body->label, body_env, t2};
    out.successors.push_back(std::move(succ));
  }
  return out;
}

namespace {

struct KcfaAnalysis {
  const CpsProgram& p;
  DomainPool& pool;
  unsigned k;

  Config initial_config() const {
    DomainPool::EnvBindings root_env;
    if (auto hv = p.halt_var())
      root_env.emplace_back(*hv, pool.empty_time());
    EnvId env = pool.intern_env(restrict_bindings(
        root_env, p.free_vars(p.root())));
    return Config{p.root().label, env, pool.empty_time()};
  }

  std::vector<Config> initial_configs() { return {initial_config()}; }

  void seed_store(Store& store) {
    if (auto hv = p.halt_var())
      store.join(aalloc(*hv, pool.empty_time()), {AVal::halt()});
  }

  Outcome step(const Config& c, const Store& store) {
    return astep(p, pool, k, c, store);
  }
};

}  // namespace

WidenedSpace<Config, Addr, AVal> explore_widened_core(
    const CpsProgram& p, unsigned k, DomainPool& pool,
    const EngineOptions& opts) {
  KcfaAnalysis analysis{p, pool, k};
  return solve_widened<KcfaAnalysis, Config, Addr, AVal>(analysis, opts);
}

Result explore_widened(const CpsProgram& p, unsigned k,
                       const EngineOptions& opts) {
  Result r;
  r.k = k;
  auto space = explore_widened_core(p, k, r.pool, opts);
  r.configs = std::move(space.configs);
  r.store = std::move(space.store);
  r.final_flow = std::move(space.final_flow);
  r.metrics = space.metrics;
  return r;
}

bool widened_is_fixpoint(const CpsProgram& p, Result& r) {
  KcfaAnalysis analysis{p, r.pool, r.k};
  WidenedSpace<Config, Addr, AVal> space;
  space.configs = r.configs;
  space.store = r.store;
  space.final_flow = r.final_flow;
  return verify_fixpoint<KcfaAnalysis, Config, Addr, AVal>(analysis, space);
}

NaiveResult explore_naive(const CpsProgram& p, unsigned k,
                          std::size_t state_budget) {
  DomainPool pool;
  return explore_naive(p, k, pool, state_budget);
}

NaiveResult explore_naive(const CpsProgram& p, unsigned k, DomainPool& pool,
                          std::size_t state_budget) {
  NaiveResult r;
  KcfaAnalysis analysis{p, pool, k};

  AState init;
  init.config = analysis.initial_config();
  analysis.seed_store(init.store);

  r.states.insert(init);
  std::vector<const AState*> frontier;
  for (const AState& s : r.states) frontier.push_back(&s);

  while (!frontier.empty()) {
    r.iterations++;
    std::vector<AState> fresh;
    for (const AState* s : frontier) {
      Outcome out = astep(p, pool, k, s->config, s->store);
      for (auto& succ : out.successors) {
        AState next;
        next.config = succ.config;
        next.store = s->store;
        for (auto& [addr, flow] : succ.writes) next.store.join(addr, flow);
        fresh.push_back(std::move(next));
      }
    }
    frontier.clear();
    for (AState& s : fresh) {
      if (r.states.size() >= state_budget) {
        r.budget_exceeded = true;
        return r;
      }
      auto [it, inserted] = r.states.insert(std::move(s));
      if (inserted) frontier.push_back(&*it);
    }
  }
  r.fixpoint_reached = true;
  return r;
}

// --- Abstraction map ---

TimeId Abstraction::time(cps::Time t) const {
  return pool_.intern_time(machine_.time_labels(t, k_));
}

Addr Abstraction::addr(cps::Addr a) const {
  return Addr{a.var, time(a.time)};
}

EnvId Abstraction::env(const cps::BEnv& env) const {
  DomainPool::EnvBindings b;
  b.reserve(env.size());
  for (const auto& [v, a] : env) b.emplace_back(v, time(a.time));
  return pool_.intern_env(std::move(b));
}

AVal Abstraction::value(const cps::Value& v) const {
  switch (v.kind) {
    case cps::Value::Kind::Halt:
      return AVal::halt();
    case cps::Value::Kind::Int:
      return AVal::constant(v.value);
    case cps::Value::Kind::Clo:
      return AVal::closure(v.clo.lam->label, env(v.clo.env));
  }
  return AVal::halt();
}

Config Abstraction::config(const cps::State& s) const {
  return Config{s.call->label, env(s.env), time(s.time)};
}

Store Abstraction::store(const std::vector<cps::Write>& writes,
                         std::size_t watermark) const {
  Store out;
  for (std::size_t i = 0; i < watermark && i < writes.size(); ++i)
    out.join(addr(writes[i].addr), {value(writes[i].value)});
  return out;
}

AState Abstraction::state(const cps::State& s,
                          const std::vector<cps::Write>& writes) const {
  AState out;
  out.config = config(s);
  out.store = store(writes, s.store_watermark);
  return out;
}

SimulationCheck check_simulation(const CpsProgram& p, unsigned k,
                                 std::size_t max_steps) {
  SimulationCheck check;
  Result widened = explore_widened(p, k);

  cps::Machine machine(p, cps::TimeMode::CallString);
  Abstraction alpha(p, machine, widened.pool, k);

  auto fail = [&](const std::string& what) {
    check.ok = false;
    if (check.first_violation.empty()) check.first_violation = what;
  };

  std::size_t writes_checked = 0;
  auto check_state = [&](const cps::State& s) {
    check.states_checked++;
    Config c = alpha.config(s);
    if (!widened.configs.count(c))
      fail("config of concrete state at call#" +
           std::to_string(s.call->label) + " missing from widened result");
    // alpha(sigma) subsumption, incrementally: each concrete write joins one
    // abstract entry, so checking every write once covers every prefix.
    const auto& writes = machine.writes();
    for (; writes_checked < s.store_watermark && writes_checked < writes.size();
         ++writes_checked) {
      const cps::Write& w = writes[writes_checked];
      Addr a = alpha.addr(w.addr);
      AVal v = alpha.value(w.value);
      if (!widened.store.at(a).count(v))
        fail("abstracted store entry " + addr_str(p, widened.pool, a) +
             " not subsumed by widened store");
    }
  };

  try {
    cps::State s = machine.inject();
    check_state(s);
    for (std::size_t i = 0; i < max_steps; ++i) {
      auto next = machine.step(s);
      check.concrete_steps++;
      if (std::holds_alternative<cps::Machine::Halted>(next)) break;
      s = std::get<cps::State>(next);
      check_state(s);
    }
  } catch (const RunError& e) {
    fail(std::string("concrete machine error: ") + e.what());
  }
  return check;
}

// --- Rendering ---

std::string time_str(const DomainPool& pool, TimeId t) {
  const auto& labels = pool.time(t);
  std::string out = "[";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(labels[i]);
  }
  return out + "]";
}

std::string addr_str(const CpsProgram& p, const DomainPool& pool, Addr a) {
  return p.var_display(a.var) + "@" + time_str(pool, a.time);
}

std::string env_str(const CpsProgram& p, const DomainPool& pool, EnvId e) {
  std::string out = "{";
  bool first = true;
  for (const auto& [v, t] : pool.env(e)) {
    if (!first) out += ",";
    first = false;
    out += p.var_display(v) + "@" + time_str(pool, t);
  }
  return out + "}";
}

std::string aval_str(const CpsProgram&, const DomainPool&, const AVal& v) {
  switch (v.kind) {
    case AVal::Kind::Halt:
      return "halt";
    case AVal::Kind::Int:
      return "int#" + std::to_string(v.value);
    case AVal::Kind::Clo:
      return "lam#" + std::to_string(v.lam);
  }
  return "?";
}

FlowReport build_report(const CpsProgram& p, Result& r) {
  FlowReport report;
  report.analysis = "kcfa";
  report.k_or_m = r.k;
  report.config_count = r.configs.size();
  report.iterations = r.metrics.transfers;
  report.store_join_events = r.metrics.store_join_events;
  report.partial = r.metrics.budget_exceeded;
  report.term_count = p.term_count();

  for (Label l : p.lambda_labels()) report.env_fingerprints[l] = {};
  for (Label l : p.call_labels()) report.operator_flow[l] = {};

  // Rendering closures also tallies the environments closing each lambda.
  DomainPool& pool = r.pool;
  auto note_val = [&](const AVal& v) {
    if (v.kind == AVal::Kind::Clo)
      report.env_fingerprints[v.lam].insert(env_str(p, pool, v.env));
    return aval_str(p, pool, v);
  };

  for (const auto& [addr, vals] : r.store.entries) {
    auto& slot = report.addresses[addr_str(p, pool, addr)];
    for (const AVal& v : vals) slot.insert(note_val(v));
  }
  for (const AVal& v : r.final_flow) report.final_flow.insert(note_val(v));

  // Operator flow per call site, over every reached config. Literal-lambda
  // operators only ever exist here, so closure tallying must include this.
  for (const Config& c : r.configs) {
    const CallSite& call = *p.call_at(c.call);
    Flow f = aeval(p, pool, call.op, c.env, r.store);
    auto& slot = report.operator_flow[call.label];
    for (const AVal& v : f) slot.insert(note_val(v));
  }
  return report;
}

}  // namespace cfa::kcfa
