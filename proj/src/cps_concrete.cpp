#include "cfa/cps_concrete.hpp"

#include <algorithm>

namespace cfa::cps {

Machine::Machine(const CpsProgram& program, TimeMode mode)
    : prog_(program), mode_(mode) {
  time_nodes_.push_back(TimeNode{});  // serial 0: initial time, empty history
}

State Machine::inject() {
  State s;
  s.call = &prog_.root();
  s.time = 0;
  if (auto hv = prog_.halt_var()) {
    Addr a = alloc(*hv, 0);
    store_put(a, Value::halt());
    s.env.emplace(*hv, a);
  }
  s.store_watermark = writes_.size();
  return s;
}

Value Machine::eval_atom(const Exp& e, const BEnv& env) const {
  switch (e.kind) {
    case Exp::Kind::VarRef: {
      auto it = env.find(e.var);
      if (it == env.end())
        throw RunError(RunError::Kind::UnboundVariable,
                       "unbound variable " + prog_.var_display(e.var));
      const Value* v = store_get(it->second);
      if (!v)
        throw RunError(RunError::Kind::InternalInvariant,
                       "environment address missing from store for " +
                           prog_.var_display(e.var));
      return *v;
    }
    case Exp::Kind::LamRef: {
      Clo c;
      c.lam = e.lam;
      for (VarId fv : prog_.free_vars(*e.lam)) {
        auto it = env.find(fv);
        if (it == env.end())
          throw RunError(RunError::Kind::UnboundVariable,
                         "free variable " + prog_.var_display(fv) +
                             " unbound at closure creation");
        c.env.emplace(fv, it->second);
      }
      return Value::closure(std::move(c));
    }
    case Exp::Kind::Const:
      return Value::constant(e.value);
  }
  throw RunError(RunError::Kind::InternalInvariant, "bad expression kind");
}

Time Machine::tick(const CallSite& call, Time t) {
  if (mode_ == TimeMode::Counter) return t + 1;
  // Call-string times are identified by their node index; indices grow
  // strictly, which gives Eq. 1 for free.
  const TimeNode& prev = time_nodes_[static_cast<std::size_t>(t)];
  time_nodes_.push_back(TimeNode{call.label, t, prev.len + 1});
  return time_nodes_.size() - 1;
}

std::vector<Label> Machine::time_labels(Time t, std::size_t max) const {
  std::vector<Label> out;
  while (t != 0 && out.size() < max) {
    const TimeNode& n = time_nodes_[static_cast<std::size_t>(t)];
    if (n.len == 0) break;  // Counter mode nodes carry no history
    out.push_back(n.head);
    t = n.prev;
  }
  return out;
}

const Value* Machine::store_get(Addr a) const {
  auto it = store_.find(a);
  return it == store_.end() ? nullptr : &it->second;
}

void Machine::store_put(Addr a, Value v) {
  auto [it, inserted] = store_.emplace(a, v);
  if (!inserted)
    throw RunError(RunError::Kind::InternalInvariant,
                   "address written twice: " + prog_.var_display(a.var));
  writes_.push_back(Write{a, std::move(v)});
}

std::variant<State, Machine::Halted> Machine::step(const State& s) {
  const CallSite& call = *s.call;
  Value f = eval_atom(call.op, s.env);
  std::vector<Value> args;
  args.reserve(call.args.size());
  for (const Exp& a : call.args) args.push_back(eval_atom(a, s.env));

  if (f.kind == Value::Kind::Halt) {
    if (args.size() != 1)
      throw RunError(RunError::Kind::ArityMismatch,
                     "halt applied to " + std::to_string(args.size()) +
                         " arguments");
    return Halted{args[0]};
  }
  if (f.kind != Value::Kind::Clo)
    throw RunError(RunError::Kind::NotAClosure,
                   "operator of call #" + std::to_string(call.label) +
                       " is not a closure");
  const Lam& lam = *f.clo.lam;
  if (lam.params.size() != args.size())
    throw RunError(RunError::Kind::ArityMismatch,
                   "call #" + std::to_string(call.label) + " passes " +
                       std::to_string(args.size()) + " arguments, lambda #" +
                       std::to_string(lam.label) + " takes " +
                       std::to_string(lam.params.size()));

  Time t2 = tick(call, s.time);
  BEnv env2 = f.clo.env;
  for (std::size_t i = 0; i < lam.params.size(); ++i) {
    Addr a = alloc(lam.params[i], t2);
    store_put(a, args[i]);
    env2[lam.params[i]] = a;
  }
  // Keep only the bindings visible to the body; the dropped entries can
  // never be read and this keeps environments canonical for abstraction.
  BEnv trimmed;
  for (VarId fv : prog_.free_vars(*lam.body)) {
    auto it = env2.find(fv);
    if (it != env2.end()) trimmed.emplace(fv, it->second);
  }

  State next;
  next.call = lam.body;
  next.env = std::move(trimmed);
  next.time = t2;
  next.store_watermark = writes_.size();
  return next;
}

RunResult run_concrete(const CpsProgram& program, std::size_t max_steps,
                       TimeMode mode) {
  Machine m(program, mode);
  RunResult r;
  State s = m.inject();
  r.states.push_back(s);
  while (r.steps < max_steps) {
    auto next = m.step(s);
    r.steps++;
    if (std::holds_alternative<Machine::Halted>(next)) {
      r.halt_value = std::get<Machine::Halted>(next).value;
      r.writes = m.writes();
      return r;
    }
    s = std::get<State>(next);
    r.states.push_back(s);
  }
  r.budget_exhausted = true;
  r.writes = m.writes();
  return r;
}

std::string value_display(const CpsProgram&, const Value& v) {
  switch (v.kind) {
    case Value::Kind::Halt:
      return "halt";
    case Value::Kind::Int:
      return "int#" + std::to_string(v.value);
    case Value::Kind::Clo:
      return "lam#" + std::to_string(v.clo.lam->label);
  }
  return "?";
}

std::string dump_trace(const CpsProgram& program, const RunResult& r) {
  std::string out;
  for (const State& s : r.states) {
    out += "call#" + std::to_string(s.call->label) + " t=" +
           std::to_string(s.time) + " env={";
    bool first = true;
    for (const auto& [v, a] : s.env) {
      if (!first) out += ",";
      first = false;
      out += program.var_display(v) + "@" + std::to_string(a.time);
    }
    out += "}\n";
  }
  if (r.halt_value)
    out += "halt " + value_display(program, *r.halt_value) + "\n";
  else if (r.budget_exhausted)
    out += "budget exhausted after " + std::to_string(r.steps) + " steps\n";
  return out;
}

}  // namespace cfa::cps
