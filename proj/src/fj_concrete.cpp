#include "cfa/fj_concrete.hpp"

namespace cfa::fj {

FjMachine::FjMachine(const FjProgram& program, TickMode mode)
    : prog_(program), mode_(mode) {
  time_nodes_.push_back(TimeNode{});  // time 0: empty history
}

FJState FjMachine::inject() {
  FJState s;
  const MethodDecl& main = prog_.main();
  s.stmt = main.entry;
  s.time = 0;
  for (VarId v : main.locals) s.env.emplace(v, CAddr{Offset::var(v), 0});
  s.kont = CAddr{Offset::method(main.id), 0};
  store_put(s.kont, CValue::halt(), true);
  s.store_watermark = writes_.size();
  return s;
}

CTime FjMachine::tick(Label stmt_label, CTime t, bool is_invoke) {
  const TimeNode& prev = time_nodes_[t];
  if (mode_ == TickMode::CallSiteOnly && !is_invoke) {
    // Silent tick: a fresh node with the same label history keeps concrete
    // addresses fresh while the abstract time stands still.
    time_nodes_.push_back(TimeNode{0, t, prev.len, false});
  } else {
    time_nodes_.push_back(TimeNode{stmt_label, t, prev.len + 1, true});
  }
  return static_cast<CTime>(time_nodes_.size() - 1);
}

CTime FjMachine::restore(CTime saved) {
  const TimeNode& node = time_nodes_[saved];
  time_nodes_.push_back(TimeNode{0, saved, node.len, false});
  return static_cast<CTime>(time_nodes_.size() - 1);
}

std::vector<Label> FjMachine::time_labels(CTime t, std::size_t max) const {
  std::vector<Label> out;
  while (out.size() < max) {
    const TimeNode& n = time_nodes_[t];
    if (n.len == 0) break;
    if (n.adds_label) out.push_back(n.head);
    t = n.parent;
  }
  return out;
}

const CValue* FjMachine::store_get(CAddr a) const {
  auto it = store_.find(a);
  return it == store_.end() ? nullptr : &it->second;
}

const CValue& FjMachine::store_at(CAddr a, const char* what) const {
  const CValue* v = store_get(a);
  if (!v)
    throw RunError(RunError::Kind::UnboundVariable,
                   std::string("unbound ") + what);
  return *v;
}

void FjMachine::store_put(CAddr a, const CValue& v, bool must_be_fresh) {
  if (must_be_fresh && store_.count(a))
    throw RunError(RunError::Kind::InternalInvariant,
                   "allocation overwrote an existing address");
  store_[a] = v;
  writes_.push_back(CWrite{a, v});
}

std::variant<FJState, FjMachine::Halted> FjMachine::step(const FJState& s) {
  const Stmt& stmt = prog_.stmt(s.stmt);
  auto env_addr = [&](VarId v) -> CAddr {
    auto it = s.env.find(v);
    if (it == s.env.end())
      throw RunError(RunError::Kind::UnboundVariable,
                     "variable " + prog_.var_display(v) +
                         " has no address in scope");
    return it->second;
  };
  auto succ_of = [&]() -> Label {
    auto n = prog_.succ(stmt.label);
    if (!n)
      throw RunError(RunError::Kind::InternalInvariant,
                     "missing successor statement");
    return *n;
  };

  if (stmt.kind == StmtKind::Return) {
    const CValue& kv = store_at(s.kont, "continuation");
    CValue d = store_at(env_addr(stmt.ret), "return value");
    if (kv.kind == CValue::Kind::Halt) return Halted{d};
    if (kv.kind != CValue::Kind::Kont)
      throw RunError(RunError::Kind::InternalInvariant,
                     "continuation address holds a non-continuation");
    const CKont& k = kv.kont;
    CTime t2 = mode_ == TickMode::CallSiteOnly ? restore(k.saved_time)
                                               : tick(stmt.label, s.time, false);
    FJState next;
    next.stmt = k.next;
    next.env = k.env;
    next.kont = k.parent;
    next.time = t2;
    auto target = k.env.find(k.ret);
    if (target == k.env.end())
      throw RunError(RunError::Kind::InternalInvariant,
                     "continuation return variable has no address");
    store_put(target->second, d, false);
    next.store_watermark = writes_.size();
    return next;
  }

  const Expr& e = stmt.expr;
  switch (e.kind) {
    case ExprKind::Var: {
      CTime t2 = tick(stmt.label, s.time, false);
      store_put(env_addr(stmt.target),
                store_at(env_addr(e.v0), "variable"), false);
      FJState next{succ_of(), s.env, s.kont, t2, writes_.size()};
      return next;
    }
    case ExprKind::Cast: {
      CTime t2 = tick(stmt.label, s.time, false);
      // Casts copy the value unfiltered, matching the transition rule.
      store_put(env_addr(stmt.target),
                store_at(env_addr(e.v0), "cast source"), false);
      FJState next{succ_of(), s.env, s.kont, t2, writes_.size()};
      return next;
    }
    case ExprKind::FieldRead: {
      CTime t2 = tick(stmt.label, s.time, false);
      const CValue& base = store_at(env_addr(e.v0), "field base");
      if (base.kind != CValue::Kind::Obj)
        throw RunError(RunError::Kind::NotAClosure,
                       "field read on a non-object");
      auto f = base.obj.record.find(e.field);
      if (f == base.obj.record.end())
        throw RunError(RunError::Kind::UnboundField,
                       "class " + prog_.cls(base.obj.cls).name +
                           " has no field " + prog_.var_name(e.field));
      store_put(env_addr(stmt.target), store_at(f->second, "field"), false);
      FJState next{succ_of(), s.env, s.kont, t2, writes_.size()};
      return next;
    }
    case ExprKind::New: {
      CTime t2 = tick(stmt.label, s.time, false);
      const ClassDecl& cls = prog_.cls(e.cls);
      std::vector<CValue> args;
      for (VarId a : e.args)
        args.push_back(store_at(env_addr(a), "constructor argument"));
      // C(C) yields the field vector and the routing; K(a, d) produces the
      // store delta and the record.
      const std::vector<VarId>& fields = prog_.field_vector(e.cls);
      CObj obj;
      obj.cls = e.cls;
      for (std::size_t i = 0; i < fields.size(); ++i) {
        CAddr a{Offset::var(fields[i]), t2};
        store_put(a, args[cls.ctor.field_source[i]], true);
        obj.record.emplace(fields[i], a);
      }
      store_put(env_addr(stmt.target), CValue::object(std::move(obj)),
                false);
      FJState next{succ_of(), s.env, s.kont, t2, writes_.size()};
      return next;
    }
    case ExprKind::Invoke: {
      const CValue& recv = store_at(env_addr(e.v0), "receiver");
      if (recv.kind != CValue::Kind::Obj)
        throw RunError(RunError::Kind::NotAClosure,
                       "method call on a non-object");
      auto mid = prog_.dispatch(recv.obj.cls, e.method);
      if (!mid)
        throw RunError(RunError::Kind::DispatchFailure,
                       "class " + prog_.cls(recv.obj.cls).name +
                           " has no method " + e.method);
      const MethodDecl& m = prog_.method(*mid);
      if (m.params.size() != e.args.size())
        throw RunError(RunError::Kind::ArityMismatch,
                       "method " + prog_.method_display(*mid) +
                           " arity mismatch");
      std::vector<CValue> args;
      for (VarId a : e.args)
        args.push_back(store_at(env_addr(a), "argument"));

      CTime t2 = tick(stmt.label, s.time, true);
      CKont kont{stmt.target, succ_of(), s.env, s.kont, s.time};
      CAddr kaddr{Offset::method(m.id), t2};
      store_put(kaddr, CValue::kontv(std::move(kont)), false);

      FJState next;
      next.stmt = m.entry;
      next.env.emplace(prog_.this_var(), env_addr(e.v0));
      for (std::size_t i = 0; i < m.params.size(); ++i) {
        CAddr a{Offset::var(m.params[i]), t2};
        store_put(a, args[i], false);
        next.env.emplace(m.params[i], a);
      }
      for (VarId l : m.locals)
        next.env.emplace(l, CAddr{Offset::var(l), t2});
      next.kont = kaddr;
      next.time = t2;
      next.store_watermark = writes_.size();
      return next;
    }
  }
  throw RunError(RunError::Kind::InternalInvariant, "bad statement");
}

FjRunResult run_fj(FjMachine& m, std::size_t max_steps) {
  FjRunResult r;
  FJState s = m.inject();
  r.states.push_back(s);
  while (r.steps < max_steps) {
    auto next = m.step(s);
    r.steps++;
    if (std::holds_alternative<FjMachine::Halted>(next)) {
      r.halt_value = std::get<FjMachine::Halted>(next).value;
      return r;
    }
    s = std::get<FJState>(next);
    r.states.push_back(s);
  }
  r.budget_exhausted = true;
  return r;
}

std::string dump_trace(const FjProgram& p, const FjMachine& m,
                       const FjRunResult& r) {
  std::string out;
  for (const FJState& s : r.states) {
    out += "stmt#" + std::to_string(s.stmt) + " t|" +
           std::to_string(m.time_labels(s.time).size()) + " env={";
    bool first = true;
    for (const auto& [v, a] : s.env) {
      if (!first) out += ",";
      first = false;
      out += p.var_display(v);
    }
    out += "}\n";
  }
  if (r.halt_value && r.halt_value->kind == CValue::Kind::Obj)
    out += "halt " + p.cls(r.halt_value->obj.cls).name + "\n";
  return out;
}

}  // namespace cfa::fj
