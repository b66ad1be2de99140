#include "cfa/mcfa.hpp"

#include <algorithm>

namespace cfa::mcfa {

// ---- Concrete flat machine ----

FlatMachine::FlatMachine(const CpsProgram& program, Policy policy)
    : prog_(program), policy_(policy) {
  frame_nodes_.push_back(FrameNode{});  // node 0: empty frame list
  envs_.push_back(CEnv{0, 0});          // serial 0: top-level environment
}

CState FlatMachine::inject() {
  CState s;
  s.call = &prog_.root();
  s.env_serial = 0;
  if (auto hv = prog_.halt_var())
    store_put(CAddr{*hv, 0}, CValue::halt());
  s.store_watermark = writes_.size();
  return s;
}

std::uint64_t FlatMachine::new_env(const CallSite& call,
                                   std::uint64_t invoker_env, const Lam& lam,
                                   std::uint64_t closure_env) {
  std::uint64_t serial = envs_.size();
  bool restore = policy_ == Policy::TopMFrames &&
                 lam.kind == LamKind::Continuation;
  if (restore) {
    envs_.push_back(CEnv{serial, envs_[closure_env].frames_node});
  } else {
    std::uint32_t parent = envs_[invoker_env].frames_node;
    frame_nodes_.push_back(
        FrameNode{call.label, parent, frame_nodes_[parent].len + 1});
    envs_.push_back(
        CEnv{serial, static_cast<std::uint32_t>(frame_nodes_.size() - 1)});
  }
  return serial;
}

std::vector<Label> FlatMachine::frames(std::uint64_t serial,
                                       std::size_t max) const {
  std::vector<Label> out;
  std::uint32_t node = envs_[serial].frames_node;
  while (frame_nodes_[node].len > 0 && out.size() < max) {
    out.push_back(frame_nodes_[node].head);
    node = frame_nodes_[node].parent;
  }
  return out;
}

CValue FlatMachine::eval_atom(const Exp& e, std::uint64_t env_serial) const {
  switch (e.kind) {
    case Exp::Kind::VarRef: {
      const CValue* v = store_get(CAddr{e.var, env_serial});
      if (!v)
        throw RunError(RunError::Kind::UnboundVariable,
                       "unbound variable " + prog_.var_display(e.var) +
                           " in flat environment " +
                           std::to_string(env_serial));
      return *v;
    }
    case Exp::Kind::LamRef:
      return CValue::closure(CClo{e.lam, env_serial});
    case Exp::Kind::Const:
      return CValue::constant(e.value);
  }
  throw RunError(RunError::Kind::InternalInvariant, "bad expression kind");
}

const CValue* FlatMachine::store_get(CAddr a) const {
  auto it = store_.find(a);
  return it == store_.end() ? nullptr : &it->second;
}

void FlatMachine::store_put(CAddr a, const CValue& v) {
  auto [it, inserted] = store_.emplace(a, v);
  if (!inserted)
    throw RunError(RunError::Kind::InternalInvariant,
                   "flat store address written twice");
  writes_.push_back(CWrite{a, v});
}

std::variant<CState, FlatMachine::Halted> FlatMachine::step(const CState& s) {
  const CallSite& call = *s.call;
  CValue f = eval_atom(call.op, s.env_serial);
  std::vector<CValue> args;
  args.reserve(call.args.size());
  for (const Exp& a : call.args) args.push_back(eval_atom(a, s.env_serial));

  if (f.kind == CValue::Kind::Halt) {
    if (args.size() != 1)
      throw RunError(RunError::Kind::ArityMismatch,
                     "halt applied to " + std::to_string(args.size()) +
                         " arguments");
    return Halted{args[0]};
  }
  if (f.kind != CValue::Kind::Clo)
    throw RunError(RunError::Kind::NotAClosure,
                   "operator of call #" + std::to_string(call.label) +
                       " is not a closure");
  const Lam& lam = *f.clo.lam;
  if (lam.params.size() != args.size())
    throw RunError(RunError::Kind::ArityMismatch,
                   "call #" + std::to_string(call.label) +
                       " arity mismatch against lambda #" +
                       std::to_string(lam.label));

  std::uint64_t rho2 = new_env(call, s.env_serial, lam, f.clo.env_serial);
  for (std::size_t i = 0; i < lam.params.size(); ++i)
    store_put(CAddr{lam.params[i], rho2}, args[i]);
  // Flat-closure copy: every free variable of the invoked lambda moves into
  // the fresh environment from the closure's environment.
  for (VarId x : prog_.free_vars(lam)) {
    const CValue* v = store_get(CAddr{x, f.clo.env_serial});
    if (!v)
      throw RunError(RunError::Kind::InternalInvariant,
                     "flat contract violated: " + prog_.var_display(x) +
                         " missing from closure environment");
    store_put(CAddr{x, rho2}, *v);
  }

  CState next;
  next.call = lam.body;
  next.env_serial = rho2;
  next.store_watermark = writes_.size();
  return next;
}

FlatRunResult run_flat(FlatMachine& m, std::size_t max_steps) {
  FlatRunResult r;
  CState s = m.inject();
  r.states.push_back(s);
  while (r.steps < max_steps) {
    auto next = m.step(s);
    r.steps++;
    if (std::holds_alternative<FlatMachine::Halted>(next)) {
      r.halt_value = std::get<FlatMachine::Halted>(next).value;
      return r;
    }
    s = std::get<CState>(next);
    r.states.push_back(s);
  }
  r.budget_exhausted = true;
  return r;
}

// ---- Abstract machine ----

EnvPool::EnvPool() {
  envs_.emplace_back();
  ids_.emplace(std::vector<Label>{}, 0);
}

EnvId EnvPool::intern(std::vector<Label> frames) {
  auto it = ids_.find(frames);
  if (it != ids_.end()) return it->second;
  EnvId id = static_cast<EnvId>(envs_.size());
  envs_.push_back(frames);
  ids_.emplace(std::move(frames), id);
  return id;
}

EnvId new_env_abstract(EnvPool& pool, Label call, EnvId invoker_env,
                       LamKind lam_kind, EnvId closure_env, unsigned m,
                       Policy policy) {
  if (policy == Policy::TopMFrames && lam_kind == LamKind::Continuation)
    return closure_env;  // restore the environment the continuation closed
  if (m == 0) return pool.empty();
  const std::vector<Label>& old = pool.frames(invoker_env);
  std::vector<Label> next;
  next.reserve(m);
  next.push_back(call);
  for (std::size_t i = 0; i + 1 < m && i < old.size(); ++i)
    next.push_back(old[i]);
  return pool.intern(std::move(next));
}

namespace {

Flow aeval(const Exp& e, EnvId env, const Store& store,
           std::vector<Addr>* reads) {
  switch (e.kind) {
    case Exp::Kind::VarRef: {
      Addr a{e.var, env};
      if (reads) reads->push_back(a);
      return store.at(a);
    }
    case Exp::Kind::LamRef:
      return {AVal::closure(e.lam->label, env)};
    case Exp::Kind::Const:
      return {AVal::constant(e.value)};
  }
  return {};
}

}  // namespace

Outcome astep(const CpsProgram& p, EnvPool& pool, unsigned m, Policy policy,
              const Config& c, const Store& store) {
  Outcome out;
  const CallSite& call = *p.call_at(c.call);

  Flow f_flow = aeval(call.op, c.env, store, &out.reads);
  std::vector<Flow> arg_flows;
  arg_flows.reserve(call.args.size());
  for (const Exp& a : call.args)
    arg_flows.push_back(aeval(a, c.env, store, &out.reads));

  for (const AVal& f : f_flow) {
    if (f.kind == AVal::Kind::Halt) {
      if (arg_flows.size() == 1)
        out.halt_flow.insert(arg_flows[0].begin(), arg_flows[0].end());
      continue;
    }
    if (f.kind != AVal::Kind::Clo) continue;
    const Lam& lam = *p.lam_at(f.lam);
    if (lam.params.size() != arg_flows.size()) continue;

    EnvId rho2 =
        new_env_abstract(pool, call.label, c.env, lam.kind, f.env, m, policy);
    Successor<Config, Addr, AVal> succ;
    for (std::size_t i = 0; i < lam.params.size(); ++i)
      succ.writes.emplace_back(Addr{lam.params[i], rho2}, arg_flows[i]);
    // Flat copy of the lambda's free variables into the new environment.
    for (VarId x : p.free_vars(lam)) {
      Addr src{x, f.env};
      out.reads.push_back(src);
      succ.writes.emplace_back(Addr{x, rho2}, store.at(src));
    }
    succ.config = Config{lam.body->label, rho2};
    out.successors.push_back(std::move(succ));
  }
  return out;
}

namespace {

struct McfaAnalysis {
  const CpsProgram& p;
  EnvPool& pool;
  unsigned m;
  Policy policy;

  std::vector<Config> initial_configs() {
    return {Config{p.root().label, pool.empty()}};
  }

  void seed_store(Store& store) {
    if (auto hv = p.halt_var())
      store.join(Addr{*hv, pool.empty()}, {AVal::halt()});
  }

  Outcome step(const Config& c, const Store& store) {
    return astep(p, pool, m, policy, c, store);
  }
};

}  // namespace

Result explore_widened(const CpsProgram& p, unsigned m, Policy policy,
                       const EngineOptions& opts) {
  Result r;
  r.m = m;
  r.policy = policy;
  McfaAnalysis analysis{p, r.pool, m, policy};
  auto space = solve_widened<McfaAnalysis, Config, Addr, AVal>(analysis, opts);
  r.configs = std::move(space.configs);
  r.store = std::move(space.store);
  r.final_flow = std::move(space.final_flow);
  r.metrics = space.metrics;
  return r;
}

bool widened_is_fixpoint(const CpsProgram& p, Result& r) {
  McfaAnalysis analysis{p, r.pool, r.m, r.policy};
  WidenedSpace<Config, Addr, AVal> space;
  space.configs = r.configs;
  space.store = r.store;
  space.final_flow = r.final_flow;
  return verify_fixpoint<McfaAnalysis, Config, Addr, AVal>(analysis, space);
}

std::string env_str(const EnvPool& pool, EnvId e) {
  const auto& frames = pool.frames(e);
  std::string out = "[";
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(frames[i]);
  }
  return out + "]";
}

std::string aval_str(const AVal& v) {
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
  report.analysis = r.policy == Policy::TopMFrames ? "mcfa" : "polykcfa";
  report.k_or_m = r.m;
  report.policy = policy_name(r.policy);
  report.config_count = r.configs.size();
  report.iterations = r.metrics.transfers;
  report.store_join_events = r.metrics.store_join_events;
  report.partial = r.metrics.budget_exceeded;
  report.term_count = p.term_count();

  for (Label l : p.lambda_labels()) report.env_fingerprints[l] = {};
  for (Label l : p.call_labels()) report.operator_flow[l] = {};

  auto note_val = [&](const AVal& v) {
    if (v.kind == AVal::Kind::Clo)
      report.env_fingerprints[v.lam].insert(env_str(r.pool, v.env));
    return aval_str(v);
  };

  for (const auto& [addr, vals] : r.store.entries) {
    auto& slot = report.addresses[p.var_display(addr.var) + "@" +
                                  env_str(r.pool, addr.env)];
    for (const AVal& v : vals) slot.insert(note_val(v));
  }
  for (const AVal& v : r.final_flow) report.final_flow.insert(note_val(v));
  for (const Config& c : r.configs) {
    const CallSite& call = *p.call_at(c.call);
    Flow f = aeval(call.op, c.env, r.store, nullptr);
    auto& slot = report.operator_flow[call.label];
    for (const AVal& v : f) slot.insert(note_val(v));
  }
  return report;
}

bool check_flat_contract(const CpsProgram& p, const Result& r,
                         std::string* violation) {
  auto check_val = [&](const AVal& v) {
    if (v.kind != AVal::Kind::Clo) return true;
    const Lam* lam = p.lam_at(v.lam);
    for (VarId x : p.free_vars(*lam)) {
      if (!r.store.entries.count(Addr{x, v.env})) {
        if (violation)
          *violation = "free variable " + p.var_display(x) + " of lam#" +
                       std::to_string(v.lam) + " missing at env " +
                       env_str(r.pool, v.env);
        return false;
      }
    }
    return true;
  };
  for (const auto& [addr, vals] : r.store.entries)
    for (const AVal& v : vals)
      if (!check_val(v)) return false;
  for (const AVal& v : r.final_flow)
    if (!check_val(v)) return false;
  return true;
}

SimulationCheck check_simulation(const CpsProgram& p, unsigned m,
                                 Policy policy, std::size_t max_steps) {
  SimulationCheck check;
  Result widened = explore_widened(p, m, policy);
  FlatMachine machine(p, policy);

  auto fail = [&](const std::string& what) {
    check.ok = false;
    if (check.first_violation.empty()) check.first_violation = what;
  };

  // alpha((n, frames)) = first_m(frames)
  auto alpha_env = [&](std::uint64_t serial) {
    return widened.pool.intern(machine.frames(serial, m));
  };
  auto alpha_value = [&](const CValue& v) {
    switch (v.kind) {
      case CValue::Kind::Halt:
        return AVal::halt();
      case CValue::Kind::Int:
        return AVal::constant(v.value);
      case CValue::Kind::Clo:
        return AVal::closure(v.clo.lam->label, alpha_env(v.clo.env_serial));
    }
    return AVal::halt();
  };

  std::size_t writes_checked = 0;
  auto check_state = [&](const CState& s) {
    check.states_checked++;
    Config c{s.call->label, alpha_env(s.env_serial)};
    if (!widened.configs.count(c))
      fail("config at call#" + std::to_string(s.call->label) +
           " missing from widened result");
    const auto& writes = machine.writes();
    for (; writes_checked < s.store_watermark &&
           writes_checked < writes.size();
         ++writes_checked) {
      const CWrite& w = writes[writes_checked];
      Addr a{w.addr.var, alpha_env(w.addr.env_serial)};
      if (!widened.store.at(a).count(alpha_value(w.value)))
        fail("abstracted flat store entry at " + p.var_display(w.addr.var) +
             " not subsumed");
    }
  };

  try {
    CState s = machine.inject();
    check_state(s);
    for (std::size_t i = 0; i < max_steps; ++i) {
      auto next = machine.step(s);
      check.concrete_steps++;
      if (std::holds_alternative<FlatMachine::Halted>(next)) break;
      s = std::get<CState>(next);
      check_state(s);
    }
  } catch (const RunError& e) {
    fail(std::string("concrete flat machine error: ") + e.what());
  }
  return check;
}

}  // namespace cfa::mcfa
