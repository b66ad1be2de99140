#include "cfa/fj_kcfa.hpp"

#include <algorithm>

namespace cfa::fj {

FjPool::FjPool() {
  times_.emplace_back();
  time_ids_.emplace(std::vector<Label>{}, 0);
}

TimeId FjPool::intern_time(std::vector<Label> labels) {
  auto it = time_ids_.find(labels);
  if (it != time_ids_.end()) return it->second;
  TimeId id = static_cast<TimeId>(times_.size());
  times_.push_back(labels);
  time_ids_.emplace(std::move(labels), id);
  return id;
}

EnvId FjPool::intern_env(EnvRep rep) {
  auto it = env_ids_.find(rep);
  if (it != env_ids_.end()) return it->second;
  EnvId id = static_cast<EnvId>(envs_.size());
  envs_.push_back(rep);
  env_ids_.emplace(std::move(rep), id);
  return id;
}

TimeId atick(FjPool& pool, Label stmt, TimeId t, unsigned k) {
  if (k == 0) return pool.empty_time();
  const std::vector<Label>& old = pool.time(t);
  std::vector<Label> next;
  next.reserve(k);
  next.push_back(stmt);
  for (std::size_t i = 0; i + 1 < k && i < old.size(); ++i)
    next.push_back(old[i]);
  return pool.intern_time(std::move(next));
}

std::optional<AAddr> env_lookup(const FjProgram& p, const FjPool& pool,
                                EnvId env, VarId v) {
  const EnvRep& rep = pool.env(env);
  if (const EnvMap* m = std::get_if<EnvMap>(&rep)) {
    auto it = std::lower_bound(
        m->bindings.begin(), m->bindings.end(), v,
        [](const std::pair<VarId, AAddr>& b, VarId v) {
          return b.first < v;
        });
    if (it != m->bindings.end() && it->first == v) return it->second;
    return std::nullopt;
  }
  const EnvCollapsed& c = std::get<EnvCollapsed>(rep);
  if (v == p.this_var()) return c.this_addr;
  if (!c.time) return std::nullopt;
  return aalloc(v, *c.time);
}

namespace {

// Builds the callee environment [this -> recv][params,locals -> (., t2)].
EnvId make_method_env(const FjProgram& p, FjPool& pool, EnvMode mode,
                      const MethodDecl& m, std::optional<AAddr> this_addr,
                      TimeId t2) {
  bool timed = !m.params.empty() || !m.locals.empty();
  if (mode == EnvMode::Collapsed) {
    EnvCollapsed c;
    if (timed) c.time = t2;
    c.this_addr = this_addr;
    return pool.intern_env(c);
  }
  EnvMap map;
  if (this_addr) map.bindings.emplace_back(p.this_var(), *this_addr);
  for (VarId v : m.params) map.bindings.emplace_back(v, aalloc(v, t2));
  for (VarId v : m.locals) map.bindings.emplace_back(v, aalloc(v, t2));
  std::sort(map.bindings.begin(), map.bindings.end());
  return pool.intern_env(std::move(map));
}

// Object record: every field bound at the allocation time.
EnvId make_record_env(const FjProgram& p, FjPool& pool, EnvMode mode,
                      ClassId cls, TimeId t2) {
  const std::vector<VarId>& fields = p.field_vector(cls);
  if (mode == EnvMode::Collapsed) {
    EnvCollapsed c;
    if (!fields.empty()) c.time = t2;
    return pool.intern_env(c);
  }
  EnvMap map;
  for (VarId f : fields) map.bindings.emplace_back(f, aalloc(f, t2));
  std::sort(map.bindings.begin(), map.bindings.end());
  return pool.intern_env(std::move(map));
}

}  // namespace

Outcome astep_fj(const FjProgram& p, FjPool& pool, const Options& opts,
                 const Config& c, const Store& store) {
  Outcome out;
  const Stmt& stmt = p.stmt(c.stmt);

  auto lookup = [&](VarId v) { return env_lookup(p, pool, c.env, v); };
  auto read = [&](AAddr a) -> const Flow& {
    out.reads.push_back(a);
    return store.at(a);
  };
  auto tick_of = [&](bool is_invoke) {
    if (opts.tick_mode == TickMode::CallSiteOnly && !is_invoke)
      return c.time;
    return atick(pool, stmt.label, c.time, opts.k);
  };

  if (stmt.kind == StmtKind::Return) {
    auto ret_addr = lookup(stmt.ret);
    Flow d = ret_addr ? read(*ret_addr) : Flow{};
    for (const AVal& kv : read(c.kont)) {
      if (kv.kind == AVal::Kind::HaltKont) {
        out.halt_flow.insert(d.begin(), d.end());
        continue;
      }
      if (kv.kind != AVal::Kind::Kont) continue;
      TimeId t2 = opts.tick_mode == TickMode::CallSiteOnly
                      ? kv.saved.value_or(pool.empty_time())
                      : atick(pool, stmt.label, c.time, opts.k);
      auto target = env_lookup(p, pool, kv.env, kv.ret);
      Successor<Config, AAddr, AVal> succ;
      if (target) succ.writes.emplace_back(*target, d);
      succ.config = Config{kv.next, kv.env, kv.parent, t2};
      out.successors.push_back(std::move(succ));
    }
    return out;
  }

  const Expr& e = stmt.expr;
  Label succ_stmt = *p.succ(stmt.label);
  auto target_addr = lookup(stmt.target);

  switch (e.kind) {
    case ExprKind::Var: {
      TimeId t2 = tick_of(false);
      auto src = lookup(e.v0);
      Successor<Config, AAddr, AVal> succ;
      if (src && target_addr) succ.writes.emplace_back(*target_addr, read(*src));
      succ.config = Config{succ_stmt, c.env, c.kont, t2};
      out.successors.push_back(std::move(succ));
      return out;
    }
    case ExprKind::Cast: {
      TimeId t2 = tick_of(false);
      auto src = lookup(e.v0);
      Flow d = src ? read(*src) : Flow{};
      if (opts.strict_cast) {
        Flow filtered;
        for (const AVal& v : d)
          if (v.kind == AVal::Kind::Obj && p.is_subclass(v.cls, e.cls))
            filtered.insert(v);
        d = std::move(filtered);
      }
      Successor<Config, AAddr, AVal> succ;
      if (target_addr) succ.writes.emplace_back(*target_addr, d);
      succ.config = Config{succ_stmt, c.env, c.kont, t2};
      out.successors.push_back(std::move(succ));
      return out;
    }
    case ExprKind::FieldRead: {
      TimeId t2 = tick_of(false);
      auto base = lookup(e.v0);
      Flow joined;
      if (base) {
        for (const AVal& v : read(*base)) {
          if (v.kind != AVal::Kind::Obj) continue;
          auto faddr = env_lookup(p, pool, v.record, e.field);
          if (!faddr) continue;  // class without this field
          const Flow& fv = read(*faddr);
          joined.insert(fv.begin(), fv.end());
        }
      }
      Successor<Config, AAddr, AVal> succ;
      if (target_addr) succ.writes.emplace_back(*target_addr, joined);
      succ.config = Config{succ_stmt, c.env, c.kont, t2};
      out.successors.push_back(std::move(succ));
      return out;
    }
    case ExprKind::New: {
      TimeId t2 = tick_of(false);
      const ClassDecl& cls = p.cls(e.cls);
      std::vector<Flow> args;
      for (VarId a : e.args) {
        auto addr = lookup(a);
        args.push_back(addr ? read(*addr) : Flow{});
      }
      const std::vector<VarId>& fields = p.field_vector(e.cls);
      Successor<Config, AAddr, AVal> succ;
      for (std::size_t i = 0; i < fields.size(); ++i)
        succ.writes.emplace_back(aalloc(fields[i], t2),
                                 args[cls.ctor.field_source[i]]);
      EnvId record = make_record_env(p, pool, opts.env_mode, e.cls, t2);
      if (target_addr)
        succ.writes.emplace_back(*target_addr,
                                 Flow{AVal::object(e.cls, record)});
      succ.config = Config{succ_stmt, c.env, c.kont, t2};
      out.successors.push_back(std::move(succ));
      return out;
    }
    case ExprKind::Invoke: {
      auto recv_addr = lookup(e.v0);
      if (!recv_addr) return out;
      Flow receivers = read(*recv_addr);
      std::vector<Flow> args;
      for (VarId a : e.args) {
        auto addr = lookup(a);
        args.push_back(addr ? read(*addr) : Flow{});
      }
      // One successor per dispatched method of each receiver class.
      std::set<MethodId> seen;
      for (const AVal& recv : receivers) {
        if (recv.kind != AVal::Kind::Obj) continue;
        auto mid = p.dispatch(recv.cls, e.method);
        if (!mid) continue;
        if (!seen.insert(*mid).second) continue;
        const MethodDecl& m = p.method(*mid);
        if (m.params.size() != args.size()) continue;

        TimeId t2 = tick_of(true);
        AAddr kaddr = aalloc_kappa(m.id, t2);
        std::optional<TimeId> saved;
        if (opts.tick_mode == TickMode::CallSiteOnly) saved = c.time;
        AVal kont = AVal::kont(stmt.target, succ_stmt, c.env, c.kont, saved);

        Successor<Config, AAddr, AVal> succ;
        succ.writes.emplace_back(kaddr, Flow{kont});
        for (std::size_t i = 0; i < m.params.size(); ++i)
          succ.writes.emplace_back(aalloc(m.params[i], t2), args[i]);
        EnvId env2 = make_method_env(p, pool, opts.env_mode, m, *recv_addr, t2);
        succ.config = Config{m.entry, env2, kaddr, t2};
        out.successors.push_back(std::move(succ));
      }
      return out;
    }
  }
  return out;
}

namespace {

struct FjAnalysis {
  const FjProgram& p;
  FjPool& pool;
  Options opts;

  Config initial_config() {
    const MethodDecl& main = p.main();
    EnvId env = make_method_env(p, pool, opts.env_mode, main, std::nullopt,
                                pool.empty_time());
    return Config{main.entry, env,
                  aalloc_kappa(main.id, pool.empty_time()),
                  pool.empty_time()};
  }

  std::vector<Config> initial_configs() { return {initial_config()}; }

  void seed_store(Store& store) {
    store.join(aalloc_kappa(p.main().id, pool.empty_time()),
               {AVal::halt()});
  }

  Outcome step(const Config& c, const Store& store) {
    return astep_fj(p, pool, opts, c, store);
  }
};

}  // namespace

Result explore_widened_fj(const FjProgram& p, const Options& opts,
                          const EngineOptions& engine) {
  Result r;
  r.opts = opts;
  FjAnalysis analysis{p, r.pool, opts};
  auto space =
      solve_widened<FjAnalysis, Config, AAddr, AVal>(analysis, engine);
  r.configs = std::move(space.configs);
  r.store = std::move(space.store);
  r.final_flow = std::move(space.final_flow);
  r.metrics = space.metrics;
  return r;
}

bool widened_is_fixpoint(const FjProgram& p, Result& r) {
  FjAnalysis analysis{p, r.pool, r.opts};
  WidenedSpace<Config, AAddr, AVal> space;
  space.configs = r.configs;
  space.store = r.store;
  space.final_flow = r.final_flow;
  return verify_fixpoint<FjAnalysis, Config, AAddr, AVal>(analysis, space);
}

// ---- Rendering ----

std::string time_str(const FjPool& pool, TimeId t) {
  const auto& labels = pool.time(t);
  std::string out = "[";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(labels[i]);
  }
  return out + "]";
}

std::string addr_str(const FjProgram& p, const FjPool& pool, AAddr a) {
  std::string base = a.off.is_method ? p.method_display(a.off.id)
                                     : p.var_display(a.off.id);
  return base + "@" + time_str(pool, a.time);
}

// Canonical environment fingerprint: the shared binding time plus the
// receiver address. Identical for both representations by construction.
std::string env_str(const FjProgram& p, const FjPool& pool, EnvId e) {
  const EnvRep& rep = pool.env(e);
  std::optional<TimeId> time;
  std::optional<AAddr> this_addr;
  if (const EnvMap* m = std::get_if<EnvMap>(&rep)) {
    for (const auto& [v, a] : m->bindings) {
      if (v == p.this_var())
        this_addr = a;
      else
        time = a.time;  // flat invariant: all non-this times agree
    }
  } else {
    const EnvCollapsed& c = std::get<EnvCollapsed>(rep);
    time = c.time;
    this_addr = c.this_addr;
  }
  std::string out = "{t=";
  out += time ? time_str(pool, *time) : "-";
  out += ";this=";
  out += this_addr ? addr_str(p, pool, *this_addr) : "-";
  return out + "}";
}

std::string aval_str(const FjProgram& p, const FjPool& pool, const AVal& v) {
  switch (v.kind) {
    case AVal::Kind::HaltKont:
      return "halt";
    case AVal::Kind::Obj: {
      // class@allocation-time, recovered from the record.
      const EnvRep& rep = pool.env(v.record);
      std::optional<TimeId> t;
      if (const EnvMap* m = std::get_if<EnvMap>(&rep)) {
        if (!m->bindings.empty()) t = m->bindings.front().second.time;
      } else {
        t = std::get<EnvCollapsed>(rep).time;
      }
      return p.cls(v.cls).name + "@" + (t ? time_str(pool, *t) : "-");
    }
    case AVal::Kind::Kont:
      return "kont(ret=" + p.var_display(v.ret) + ",next=" +
             std::to_string(v.next) + ",env=" + env_str(p, pool, v.env) +
             ",parent=" + addr_str(p, pool, v.parent) + ")";
  }
  return "?";
}

FlowReport build_report(const FjProgram& p, Result& r) {
  FlowReport report;
  report.analysis = "fj-kcfa";
  report.k_or_m = r.opts.k;
  report.config_count = r.configs.size();
  report.iterations = r.metrics.transfers;
  report.store_join_events = r.metrics.store_join_events;
  report.partial = r.metrics.budget_exceeded;
  report.term_count = p.term_count();

  // Environments per method, keyed by the entry statement's label.
  for (const MethodDecl& m : p.methods()) report.env_fingerprints[m.entry] = {};
  for (Label l = 0; l < p.stmt_count(); ++l) {
    const Stmt& s = p.stmt(l);
    if (s.kind == StmtKind::Assign && s.expr.kind == ExprKind::Invoke)
      report.operator_flow[l] = {};
  }

  for (const Config& c : r.configs) {
    const Stmt& s = p.stmt(c.stmt);
    const MethodDecl& m = p.method(s.owner);
    if (c.stmt == m.entry)
      report.env_fingerprints[m.entry].insert(env_str(p, r.pool, c.env));
    if (s.kind == StmtKind::Assign && s.expr.kind == ExprKind::Invoke) {
      // Resolved call targets at this site.
      auto recv = env_lookup(p, r.pool, c.env, s.expr.v0);
      if (recv) {
        for (const AVal& v : r.store.at(*recv)) {
          if (v.kind != AVal::Kind::Obj) continue;
          if (auto mid = p.dispatch(v.cls, s.expr.method))
            report.operator_flow[c.stmt].insert(p.method_display(*mid));
        }
      }
    }
    // Points-to rows: every variable statically in scope at this config.
    std::string ctx = p.method_display(s.owner) + env_str(p, r.pool, c.env);
    auto& vars = report.points_to[ctx];
    auto add_var = [&](VarId v) {
      auto addr = env_lookup(p, r.pool, c.env, v);
      if (!addr) return;
      auto& slot = vars[p.var_display(v)];
      for (const AVal& val : r.store.at(*addr))
        if (val.kind == AVal::Kind::Obj)
          slot.insert(aval_str(p, r.pool, val));
    };
    if (!m.is_main) add_var(p.this_var());
    for (VarId v : m.params) add_var(v);
    for (VarId v : m.locals) add_var(v);
  }

  for (const auto& [addr, vals] : r.store.entries) {
    auto& slot = report.addresses[addr_str(p, r.pool, addr)];
    for (const AVal& v : vals) slot.insert(aval_str(p, r.pool, v));
  }
  for (const AVal& v : r.final_flow)
    report.final_flow.insert(aval_str(p, r.pool, v));
  return report;
}

bool check_flat_record_invariant(const FjProgram& p, const Result& r,
                                 std::string* violation) {
  auto check_env = [&](EnvId e, const char* what) {
    const EnvRep& rep = r.pool.env(e);
    const EnvMap* m = std::get_if<EnvMap>(&rep);
    if (!m) return true;  // collapsed form carries the invariant trivially
    std::optional<TimeId> shared;
    for (const auto& [v, a] : m->bindings) {
      if (v == p.this_var()) continue;
      if (!shared) {
        shared = a.time;
      } else if (*shared != a.time) {
        if (violation)
          *violation = std::string(what) +
                       " binds two times: " + env_str(p, r.pool, e);
        return false;
      }
    }
    return true;
  };
  for (const Config& c : r.configs)
    if (!check_env(c.env, "config environment")) return false;
  for (const auto& [addr, vals] : r.store.entries) {
    for (const AVal& v : vals) {
      if (v.kind == AVal::Kind::Obj && !check_env(v.record, "object record"))
        return false;
      if (v.kind == AVal::Kind::Kont &&
          !check_env(v.env, "continuation environment"))
        return false;
    }
  }
  return true;
}

std::size_t count_receiver_objects(const FjProgram& p, const Result& r,
                                   Label method_entry) {
  const MethodDecl& m = p.method(p.stmt(method_entry).owner);
  std::set<std::pair<ClassId, EnvId>> receivers;
  for (const Config& c : r.configs) {
    if (c.stmt != method_entry) continue;
    auto this_addr = env_lookup(p, r.pool, c.env, p.this_var());
    if (!this_addr) continue;
    for (const AVal& v : r.store.at(*this_addr))
      if (v.kind == AVal::Kind::Obj && p.dispatch(v.cls, m.name) &&
          p.method(*p.dispatch(v.cls, m.name)).entry == method_entry)
        receivers.insert({v.cls, v.record});
  }
  return receivers.size();
}

SimulationCheck check_simulation_fj(const FjProgram& p, const Options& opts,
                                    std::size_t max_steps) {
  SimulationCheck check;
  Result widened = explore_widened_fj(p, opts);
  FjMachine machine(p, opts.tick_mode);

  auto fail = [&](const std::string& what) {
    check.ok = false;
    if (check.first_violation.empty()) check.first_violation = what;
  };

  auto alpha_time = [&](CTime t) {
    return widened.pool.intern_time(machine.time_labels(t, opts.k));
  };
  auto alpha_addr = [&](CAddr a) {
    return AAddr{a.off, alpha_time(a.time)};
  };
  // Abstraction of a concrete environment, in the representation the
  // abstract run uses.
  auto alpha_env = [&](const CBEnv& env) -> EnvId {
    if (opts.env_mode == EnvMode::Map) {
      EnvMap m;
      for (const auto& [v, a] : env) m.bindings.emplace_back(v, alpha_addr(a));
      std::sort(m.bindings.begin(), m.bindings.end());
      return widened.pool.intern_env(std::move(m));
    }
    EnvCollapsed c;
    for (const auto& [v, a] : env) {
      if (v == p.this_var())
        c.this_addr = alpha_addr(a);
      else
        c.time = alpha_time(a.time);
    }
    return widened.pool.intern_env(c);
  };
  auto alpha_value = [&](const CValue& v) -> AVal {
    switch (v.kind) {
      case CValue::Kind::Halt:
        return AVal::halt();
      case CValue::Kind::Obj:
        return AVal::object(v.obj.cls, alpha_env(v.obj.record));
      case CValue::Kind::Kont: {
        std::optional<TimeId> saved;
        if (opts.tick_mode == TickMode::CallSiteOnly)
          saved = alpha_time(v.kont.saved_time);
        return AVal::kont(v.kont.ret, v.kont.next, alpha_env(v.kont.env),
                          alpha_addr(v.kont.parent), saved);
      }
    }
    return AVal::halt();
  };

  std::size_t writes_checked = 0;
  auto check_state = [&](const FJState& s) {
    check.states_checked++;
    Config c{s.stmt, alpha_env(s.env), alpha_addr(s.kont),
             alpha_time(s.time)};
    if (!widened.configs.count(c))
      fail("config at stmt#" + std::to_string(s.stmt) +
           " missing from widened result");
    const auto& writes = machine.writes();
    for (; writes_checked < s.store_watermark &&
           writes_checked < writes.size();
         ++writes_checked) {
      const CWrite& w = writes[writes_checked];
      if (!widened.store.at(alpha_addr(w.addr)).count(alpha_value(w.value)))
        fail("abstracted store entry at " +
             addr_str(p, widened.pool, alpha_addr(w.addr)) +
             " not subsumed");
    }
  };

  try {
    FJState s = machine.inject();
    check_state(s);
    for (std::size_t i = 0; i < max_steps; ++i) {
      auto next = machine.step(s);
      check.concrete_steps++;
      if (std::holds_alternative<FjMachine::Halted>(next)) break;
      s = std::get<FJState>(next);
      check_state(s);
    }
  } catch (const RunError& e) {
    fail(std::string("concrete FJ machine error: ") + e.what());
  }
  return check;
}

}  // namespace cfa::fj
