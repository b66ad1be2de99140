#include <doctest.h>

#include <fstream>
#include <sstream>

#include "cfa/bench.hpp"
#include "cfa/cps_concrete.hpp"
#include "cfa/cps_kcfa.hpp"
#include "cfa/fj_kcfa.hpp"
#include "cfa/mcfa.hpp"
#include "cfa/scheme_to_cps.hpp"

using namespace cfa;
using namespace cfa::bench;

TEST_CASE("worst-case generator: free variables and k=1 environment counts") {
  for (unsigned n : {1u, 2u, 3u}) {
    WorstCaseProgram w = gen_worst_case(n);
    const Lam* inner = w.program->lam_at(w.inner_lambda);
    REQUIRE(inner);
    CHECK(w.program->free_vars(*inner).size() == n);

    kcfa::Result r = kcfa::explore_widened(*w.program, 1);
    FlowReport report = kcfa::build_report(*w.program, r);
    CHECK(count_envs_for_lambda(report, w.inner_lambda) == (1u << n));
  }
}

TEST_CASE("worst-case programs terminate concretely within a step budget") {
  for (unsigned n : {1u, 2u, 3u, 4u}) {
    WorstCaseProgram w = gen_worst_case(n);
    auto r = cps::run_concrete(*w.program, 100000);
    CHECK(r.halt_value.has_value());
  }
}

TEST_CASE("worst-case at m=1: inner-lambda environment count stays small") {
  // Golden values from the enumeration oracle (the widened m-CFA store):
  // the inner lambda is only ever closed at the two call sites binding the
  // last variable, independent of n.
  for (unsigned n : {1u, 2u, 3u}) {
    WorstCaseProgram w = gen_worst_case(n);
    mcfa::Result r =
        mcfa::explore_widened(*w.program, 1, mcfa::Policy::TopMFrames);
    FlowReport report = mcfa::build_report(*w.program, r);
    std::size_t count = count_envs_for_lambda(report, w.inner_lambda);
    CHECK(count <= 4);
    CHECK(count == 2);  // recorded golden
  }
}

TEST_CASE("identity generator reproduces the precision triple") {
  IdentityProgram with = gen_identity(true);
  auto final_of = [](const FlowReport& r) { return r.final_flow; };

  kcfa::Result k1 = kcfa::explore_widened(*with.program, 1);
  CHECK(final_of(kcfa::build_report(*with.program, k1)) ==
        std::set<std::string>{"int#4"});
  mcfa::Result m1 = mcfa::explore_widened(*with.program, 1,
                                          mcfa::Policy::TopMFrames);
  CHECK(final_of(mcfa::build_report(*with.program, m1)) ==
        std::set<std::string>{"int#4"});
  mcfa::Result poly = mcfa::explore_widened(*with.program, 1,
                                            mcfa::Policy::LastKCalls);
  CHECK(final_of(mcfa::build_report(*with.program, poly)) ==
        std::set<std::string>{"int#3", "int#4"});
  kcfa::Result k0 = kcfa::explore_widened(*with.program, 0);
  CHECK(final_of(kcfa::build_report(*with.program, k0)) ==
        std::set<std::string>{"int#3", "int#4"});
}

TEST_CASE("paired generator: N=M=1 analyzes baz in exactly one context") {
  PairedClosureProgram p = gen_paired_closure(1, 1);

  fj::Options opts;
  opts.k = 1;
  fj::Result fr = fj::explore_widened_fj(*p.fj_program, opts);
  FlowReport freport = fj::build_report(*p.fj_program, fr);
  CHECK(count_envs_for_lambda(freport, p.baz_entry) == 1);

  kcfa::Result cr = kcfa::explore_widened(*p.cps_program, 1);
  FlowReport creport = kcfa::build_report(*p.cps_program, cr);
  CHECK(count_envs_for_lambda(creport, p.functional_closure_lambda) == 1);
}

TEST_CASE("paired generator at N=M=3: OO stays linear, functional is NxM") {
  PairedClosureProgram p = gen_paired_closure(3, 3);

  fj::Options opts;
  opts.k = 1;
  fj::Result fr = fj::explore_widened_fj(*p.fj_program, opts);
  FlowReport freport = fj::build_report(*p.fj_program, fr);
  std::size_t oo_contexts = count_envs_for_lambda(freport, p.baz_entry);
  CHECK(oo_contexts <= 3 * (3 + 3));

  kcfa::Result cr = kcfa::explore_widened(*p.cps_program, 1);
  FlowReport creport = kcfa::build_report(*p.cps_program, cr);
  std::size_t combos =
      count_envs_for_lambda(creport, p.functional_closure_lambda);
  CHECK(combos >= 9);

  // Both sides terminate concretely.
  auto run = cps::run_concrete(*p.cps_program, 100000);
  CHECK(run.halt_value.has_value());
  fj::FjMachine m(*p.fj_program);
  auto fjrun = fj::run_fj(m, 100000);
  CHECK(fjrun.halt_value.has_value());
}

TEST_CASE("count_envs_for_lambda: unreached lambda counts zero") {
  auto p = cps_convert("(define (dead x) x)(define (id y) y)(id 1)");
  kcfa::Result r = kcfa::explore_widened(*p, 1);
  FlowReport report = kcfa::build_report(*p, r);
  // find the lambda whose parameter is x (dead) — never closed or called.
  Label dead = 0;
  bool found = false;
  for (Label l : p->lambda_labels()) {
    const Lam* lam = p->lam_at(l);
    if (!lam->params.empty() && p->var(lam->params[0]).name == "x") {
      dead = l;
      found = true;
    }
  }
  REQUIRE(found);
  // The define-binding closes the dead lambda once (it flows into the
  // kappa), so its env count is 1; a lambda label outside any flow is 0.
  CHECK(count_envs_for_lambda(report, dead) <= 1);
  CHECK_THROWS_AS((void)count_envs_for_lambda(report, 9999),
                  std::out_of_range);
}

TEST_CASE("inlinable_calls counts singleton callables only") {
  // Monomorphic program (each lambda and continuation reaches exactly one
  // site): every call site is singleton.
  auto mono = cps_convert("(define (f a) a)(f 1)");
  kcfa::Result r = kcfa::explore_widened(*mono, 1);
  FlowReport report = kcfa::build_report(*mono, r);
  CHECK(inlinable_calls(report) == report.operator_flow.size());

  // An operator flowing two lambdas is not counted.
  auto p = cps_convert(
      "(define (f a) a)(define (g b) b)"
      "(define (pick h) (h 1))"
      "(pick f)(pick g)");
  kcfa::Result r0 = kcfa::explore_widened(*p, 0);
  FlowReport rep0 = kcfa::build_report(*p, r0);
  bool found_double = false;
  for (const auto& [label, flow] : rep0.operator_flow) {
    std::size_t lams = 0;
    for (const std::string& v : flow)
      if (v.rfind("lam#", 0) == 0) lams++;
    if (lams == 2) found_double = true;
  }
  CHECK(found_double);
  CHECK(inlinable_calls(rep0) < rep0.operator_flow.size());
}

TEST_CASE("identity family: m=1 supports inlining at both id call sites") {
  IdentityProgram with = gen_identity(true);
  mcfa::Result r =
      mcfa::explore_widened(*with.program, 1, mcfa::Policy::TopMFrames);
  FlowReport report = mcfa::build_report(*with.program, r);
  // Both (id _) sites have singleton operator flow {the id lambda}.
  std::size_t id_sites = 0;
  for (const auto& [label, flow] : report.operator_flow) {
    const CallSite* call = with.program->call_at(label);
    if (call->op.kind != Exp::Kind::VarRef) continue;
    if (with.program->var(call->op.var).name != "id") continue;
    id_sites++;
    CHECK(flow.size() == 1);
    CHECK(flow.begin()->rfind("lam#", 0) == 0);
  }
  CHECK(id_sites == 2);
}

TEST_CASE("run_matrix produces one row per compatible cell") {
  auto programs = family_programs("identity", 0, 0);
  auto analyses = parse_analyses("kcfa:1,mcfa:1,polykcfa:1,kcfa:0");
  auto rows = run_matrix(programs, analyses, CellBudget{});
  CHECK(rows.size() == 8);  // 2 programs x 4 CPS analyses
  for (const auto& row : rows) {
    CHECK(!row.timeout);
    CHECK(row.transfers > 0);
    CHECK(row.terms > 0);
  }
  // k=0 and m=0 rows have identical flow metrics.
  auto programs2 = family_programs("worst-case", 1, 2);
  auto analyses2 = parse_analyses("kcfa:0,mcfa:0");
  auto rows2 = run_matrix(programs2, analyses2, CellBudget{});
  REQUIRE(rows2.size() == 4);
  for (std::size_t i = 0; i + 1 < rows2.size(); i += 2) {
    CHECK(rows2[i].report.operator_flow == rows2[i + 1].report.operator_flow);
    CHECK(rows2[i].inlinable == rows2[i + 1].inlinable);
  }
}

TEST_CASE("run_matrix: empty program list yields an empty matrix") {
  auto rows = run_matrix({}, parse_analyses("kcfa:1"), CellBudget{});
  CHECK(rows.empty());
}

TEST_CASE("run_matrix marks timeouts distinctly") {
  auto programs = family_programs("worst-case", 4, 4);
  CellBudget tiny;
  tiny.transfers = 3;
  auto rows = run_matrix(programs, parse_analyses("kcfa:1"), tiny);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].timeout);
  // Timeouts are data: partial metrics are still present.
  CHECK(rows[0].transfers >= 3);
}

TEST_CASE("matrix csv has the documented column order") {
  auto rows = run_matrix(family_programs("identity", 0, 0),
                         parse_analyses("kcfa:0"), CellBudget{});
  std::string csv = matrix_csv(rows);
  CHECK(csv.rfind("program,terms,analysis,k_or_m,policy,transfers,configs,"
                  "inlinable,time_ms,timeout\n",
                  0) == 0);
}

TEST_CASE("parallel matrix execution matches sequential results") {
  auto programs = family_programs("worst-case", 1, 3);
  auto analyses = parse_analyses("kcfa:1,mcfa:1");
  auto seq = run_matrix(programs, analyses, CellBudget{}, 1);
  auto par = run_matrix(programs, analyses, CellBudget{}, 4);
  REQUIRE(seq.size() == par.size());
  for (std::size_t i = 0; i < seq.size(); ++i) {
    CHECK(seq[i].program == par[i].program);
    CHECK(seq[i].transfers == par[i].transfers);
    CHECK(seq[i].configs == par[i].configs);
    CHECK(seq[i].report.to_json() == par[i].report.to_json());
  }
}

TEST_CASE("transfer counts are nondecreasing in n per analysis") {
  auto programs = family_programs("worst-case", 1, 4);
  for (const char* analysis : {"kcfa:1", "mcfa:1", "polykcfa:1", "kcfa:0"}) {
    auto rows = run_matrix(programs, parse_analyses(analysis), CellBudget{});
    for (std::size_t i = 1; i < rows.size(); ++i)
      CHECK(rows[i].transfers >= rows[i - 1].transfers);
  }
}

TEST_CASE("bad analysis specs are rejected") {
  CHECK_THROWS_AS(parse_analyses("zcfa:1"), std::invalid_argument);
  CHECK_THROWS_AS(parse_analyses("kcfa"), std::invalid_argument);
  CHECK_THROWS_AS((void)family_programs("nope", 1, 2),
                  std::invalid_argument);
}

TEST_CASE("committed corpus programs stay in sync with the generators") {
  auto read = [](const std::string& name) {
    std::ifstream in(std::string(CFA_CORPUS_DIR) + "/" + name);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  auto corpus_worst = cps_convert(read("worst_4.scm"));
  auto generated = gen_worst_case(4);
  CHECK(alpha_equivalent(*corpus_worst, *generated.program));

  auto corpus_ds = cps_convert(read("id_ds.scm"));
  CHECK(alpha_equivalent(*corpus_ds, *gen_identity(true).program));

  auto corpus_oo = fj::parse_fj(read("paired_oo_1.fj"));
  auto gen_oo = gen_paired_closure(1, 1);
  CHECK(corpus_oo->stmt_count() == gen_oo.fj_program->stmt_count());
  CHECK(corpus_oo->classes().size() == gen_oo.fj_program->classes().size());
}
