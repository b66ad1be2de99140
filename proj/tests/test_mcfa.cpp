#include <doctest.h>

#include "cfa/cps_kcfa.hpp"
#include "cfa/mcfa.hpp"
#include "cfa/scheme_to_cps.hpp"

using namespace cfa;
using namespace cfa::mcfa;

namespace {

const std::string kIdentity = "(define (id x) x)(id 3)(id 4)";
const std::string kIdentityDs =
    "(define (do-something) 0)"
    "(define (id x) (do-something) x)"
    "(id 3)(id 4)";

std::set<std::string> final_strings(Result& r) {
  std::set<std::string> out;
  for (const AVal& v : r.final_flow) out.insert(aval_str(v));
  return out;
}

std::vector<std::string> corpus() {
  return {
      kIdentity,
      kIdentityDs,
      "(define (b y) y)(define (a x) (b x) x)(a 5)(a 6)",
      "(define (apply1 f) (f 7))(apply1 (lambda (q) q))",
      "(define (tru t e) (t))(if tru 1 2)",
  };
}

}  // namespace

TEST_CASE("flat step copies free variables into the fresh environment") {
  // Invoking (lambda (z) (z x1)) with x1 free copies x1 alongside z.
  auto p = parse_cps(
      "((lambda (x1 k) ((lambda (z) (z x1)) k)) 9 halt)");
  FlatMachine m(*p);
  CState s = m.inject();
  s = std::get<CState>(m.step(s));  // binds x1, k at rho1
  std::uint64_t rho1 = s.env_serial;
  s = std::get<CState>(m.step(s));  // invokes the z-lambda, copies x1
  std::uint64_t rho2 = s.env_serial;
  CHECK(rho2 != rho1);
  const Lam* zlam = nullptr;
  for (Label l : p->lambda_labels())
    if (p->var(p->lam_at(l)->params[0]).name == "z") zlam = p->lam_at(l);
  REQUIRE(zlam);
  VarId x1 = p->free_vars(*zlam)[0];
  const CValue* copied = m.store_get(CAddr{x1, rho2});
  REQUIRE(copied);
  CHECK(copied->kind == CValue::Kind::Int);
  CHECK(copied->value == 9);
}

TEST_CASE("closed lambda invocation writes only parameter bindings") {
  auto p = parse_cps("((lambda (w) (w w)) halt)");
  FlatMachine m(*p);
  CState s = m.inject();
  std::size_t before = m.writes().size();
  s = std::get<CState>(m.step(s));
  // One parameter, no free variables: exactly one write.
  CHECK(m.writes().size() == before + 1);
}

TEST_CASE("concrete flat run of the identity program halts with 4") {
  auto p = cps_convert(kIdentityDs);
  FlatMachine m(*p);
  auto r = run_flat(m, 1000);
  REQUIRE(r.halt_value.has_value());
  CHECK(r.halt_value->kind == CValue::Kind::Int);
  CHECK(r.halt_value->value == 4);
}

TEST_CASE("new_concrete pushes frames for procedures, restores for kappas") {
  auto p = parse_cps(
      "((lambda (f k) (f 1 k)) (lambda (x k2) (k2 x)) halt)");
  FlatMachine m(*p);
  CState s = m.inject();

  // Step 1: procedure entry pushes the root call label.
  s = std::get<CState>(m.step(s));
  std::uint64_t rho1 = s.env_serial;
  CHECK(rho1 == 1);  // serial strictly increases by one per allocation
  CHECK(m.frames(rho1) == std::vector<Label>{p->root().label});

  // Step 2: (f 1 k) is another procedure call, prepending its label.
  const CallSite* f_call = p->lam_at(1)->body;
  s = std::get<CState>(m.step(s));
  std::uint64_t rho2 = s.env_serial;
  CHECK(rho2 == 2);
  CHECK(m.frames(rho2) ==
        std::vector<Label>{f_call->label, p->root().label});
}

TEST_CASE("continuation entry restores the closure environment's frames") {
  // do-something returns through a kappa closed at the caller's env.
  auto p = cps_convert("(define (ds) 0)(define (a x) (ds) x)(a 5)");
  FlatMachine m(*p);
  CState s = m.inject();
  std::vector<std::vector<Label>> trace_frames;
  for (;;) {
    auto next = m.step(s);
    if (std::holds_alternative<FlatMachine::Halted>(next)) break;
    s = std::get<CState>(next);
    trace_frames.push_back(m.frames(s.env_serial, 8));
  }
  // Serial freshness: every state got a new environment.
  FlatMachine m2(*p);
  CState t = m2.inject();
  std::uint64_t prev = t.env_serial;
  for (;;) {
    auto next = m2.step(t);
    if (std::holds_alternative<FlatMachine::Halted>(next)) break;
    t = std::get<CState>(next);
    CHECK(t.env_serial > prev);
    prev = t.env_serial;
  }
}

TEST_CASE("abstract allocator: procedures push, continuations restore") {
  EnvPool pool;
  EnvId top = pool.empty();
  EnvId ca = pool.intern({10});

  // m=1 procedure entry at call c: context becomes <c>.
  CHECK(new_env_abstract(pool, 7, top, LamKind::Procedure, top, 1,
                         Policy::TopMFrames) == pool.intern({7}));
  // m=1 continuation entry: the closure's environment is restored.
  CHECK(new_env_abstract(pool, 7, pool.intern({9}), LamKind::Continuation, ca,
                         1, Policy::TopMFrames) == ca);
  // m=0 collapses everything, both policies.
  CHECK(new_env_abstract(pool, 7, ca, LamKind::Procedure, ca, 0,
                         Policy::TopMFrames) == top);
  CHECK(new_env_abstract(pool, 7, ca, LamKind::Continuation, ca, 0,
                         Policy::LastKCalls) == top);
  // LastKCalls pushes unconditionally.
  CHECK(new_env_abstract(pool, 7, pool.intern({9}), LamKind::Continuation, ca,
                         1, Policy::LastKCalls) == pool.intern({7}));
  // Truncation at m=2.
  CHECK(new_env_abstract(pool, 7, pool.intern({1, 2}), LamKind::Procedure, ca,
                         2, Policy::TopMFrames) == pool.intern({7, 1}));
}

TEST_CASE("after calling a then b and returning, the context is the call to a") {
  // Direct reading of the footnote: the top-of-stack context at the return
  // point inside a is still a's call site under m=1.
  auto p = cps_convert("(define (b y) y)(define (a x) (b x) x)(a 5)");
  Result r = explore_widened(*p, 1, Policy::TopMFrames);

  // Find the call site (a 5) and the lambda of a; x's binding env must be
  // exactly <(a 5)> and the final x read happens in that restored context.
  Label a_call = 0;
  const Lam* a_lam = nullptr;
  for (Label l : p->lambda_labels()) {
    const Lam* lam = p->lam_at(l);
    if (!lam->params.empty() && p->var(lam->params[0]).name == "x")
      a_lam = lam;
  }
  REQUIRE(a_lam);
  VarId x = a_lam->params[0];
  std::vector<EnvId> x_envs;
  for (const auto& [addr, vals] : r.store.entries)
    if (addr.var == x) x_envs.push_back(addr.env);
  REQUIRE(x_envs.size() == 1);
  CHECK(r.pool.frames(x_envs[0]).size() == 1);
  a_call = r.pool.frames(x_envs[0])[0];
  // The final value 5 flowed to halt from the restored context.
  CHECK(final_strings(r) == std::set<std::string>{"int#5"});
  CHECK(p->call_at(a_call) != nullptr);
}

TEST_CASE("m=1 top-frames keeps identity bindings distinct; last-k merges") {
  auto p = cps_convert(kIdentityDs);

  Result top = explore_widened(*p, 1, Policy::TopMFrames);
  CHECK(final_strings(top) == std::set<std::string>{"int#4"});

  Result last = explore_widened(*p, 1, Policy::LastKCalls);
  CHECK(final_strings(last) == std::set<std::string>{"int#3", "int#4"});

  Result zero = explore_widened(*p, 0, Policy::TopMFrames);
  CHECK(final_strings(zero) == std::set<std::string>{"int#3", "int#4"});
}

TEST_CASE("without the intervening call all analyses agree on 4") {
  auto p = cps_convert(kIdentity);
  for (Policy policy : {Policy::TopMFrames, Policy::LastKCalls}) {
    Result r = explore_widened(*p, 1, policy);
    CHECK(final_strings(r) == std::set<std::string>{"int#4"});
  }
}

TEST_CASE("m=0 and k=0 are the same context-insensitive analysis") {
  for (const std::string& src : corpus()) {
    auto p = cps_convert(src);
    Result m0 = explore_widened(*p, 0, Policy::TopMFrames);
    FlowReport mr = build_report(*p, m0);
    kcfa::Result k0 = kcfa::explore_widened(*p, 0);
    FlowReport kr = kcfa::build_report(*p, k0);
    CHECK(mr.operator_flow == kr.operator_flow);
    CHECK(mr.final_flow == kr.final_flow);
  }
}

TEST_CASE("flat contract holds in every widened result") {
  for (const std::string& src : corpus()) {
    auto p = cps_convert(src);
    for (unsigned m : {0u, 1u, 2u}) {
      for (Policy policy : {Policy::TopMFrames, Policy::LastKCalls}) {
        Result r = explore_widened(*p, m, policy);
        std::string violation;
        CHECK_MESSAGE(check_flat_contract(*p, r, &violation), violation);
      }
    }
  }
}

TEST_CASE("bounded flat traces abstract into the widened result") {
  for (const std::string& src : corpus()) {
    auto p = cps_convert(src);
    for (unsigned m : {0u, 1u}) {
      for (Policy policy : {Policy::TopMFrames, Policy::LastKCalls}) {
        auto check = check_simulation(*p, m, policy, 2000);
        CAPTURE(src);
        CAPTURE(check.first_violation);
        CHECK(check.ok);
      }
    }
  }
  auto omega = parse_cps("((lambda (f) (f f)) (lambda (f) (f f)))");
  auto check = check_simulation(*omega, 1, Policy::TopMFrames, 1000);
  CAPTURE(check.first_violation);
  CHECK(check.ok);
}

TEST_CASE("policy divergence: top-frames strictly refines last-k somewhere") {
  auto p = cps_convert(kIdentityDs);
  Result top = explore_widened(*p, 1, Policy::TopMFrames);
  FlowReport tr = build_report(*p, top);
  Result last = explore_widened(*p, 1, Policy::LastKCalls);
  FlowReport lr = build_report(*p, last);
  bool somewhere_strict = false;
  for (const auto& [label, flow] : tr.operator_flow) {
    const auto& lflow = lr.operator_flow.at(label);
    for (const std::string& v : flow) CHECK(lflow.count(v));
    if (flow.size() < lflow.size()) somewhere_strict = true;
  }
  somewhere_strict =
      somewhere_strict || tr.final_flow.size() < lr.final_flow.size();
  CHECK(somewhere_strict);
}

TEST_CASE("mcfa result is a fixpoint and order independent") {
  auto p = cps_convert(kIdentityDs);
  Result r = explore_widened(*p, 1, Policy::TopMFrames);
  CHECK(widened_is_fixpoint(*p, r));
  FlowReport base = build_report(*p, r);
  for (std::uint64_t seed : {1ull, 5ull}) {
    EngineOptions opts;
    opts.order = WorklistOrder::Random;
    opts.seed = seed;
    Result rr = explore_widened(*p, 1, Policy::TopMFrames, opts);
    FlowReport rb = build_report(*p, rr);
    CHECK(base.to_json() == rb.to_json());
  }
}

TEST_CASE("mcfa report carries policy and m") {
  auto p = cps_convert(kIdentity);
  Result r = explore_widened(*p, 1, Policy::LastKCalls);
  auto j = build_report(*p, r).to_json();
  CHECK(j["analysis"] == "polykcfa");
  CHECK(j["m"] == 1);
  CHECK(j["policy"] == "last-k-calls");
}
