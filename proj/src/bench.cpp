#include "cfa/bench.hpp"

#include <atomic>
#include <chrono>
#include <future>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "cfa/cps_kcfa.hpp"
#include "cfa/fj_kcfa.hpp"
#include "cfa/mcfa.hpp"
#include "cfa/scheme_to_cps.hpp"

namespace cfa::bench {

namespace {

Label find_lambda_with_param(const CpsProgram& p, const std::string& name) {
  for (Label l : p.lambda_labels()) {
    const Lam* lam = p.lam_at(l);
    if (!lam->params.empty() && p.var(lam->params[0]).name == name) return l;
  }
  throw std::logic_error("generated program lacks the expected lambda");
}

}  // namespace

WorstCaseProgram gen_worst_case(unsigned n) {
  if (n < 1) throw std::invalid_argument("worst-case family needs n >= 1");
  std::string inner = "(lambda (z) (z";
  for (unsigned i = 1; i <= n; ++i) inner += " x" + std::to_string(i);
  inner += "))";
  std::string out = inner;
  for (unsigned i = n; i >= 1; --i) {
    std::string fi = "f" + std::to_string(i);
    out = "((lambda (" + fi + ") (" + fi + " 0) (" + fi + " 1))\n (lambda (x" +
          std::to_string(i) + ") " + out + "))";
    if (i == 1) break;
  }
  WorstCaseProgram w;
  w.scheme_source = out;
  w.program = cps_convert(out);
  w.inner_lambda = find_lambda_with_param(*w.program, "z");
  return w;
}

PairedClosureProgram gen_paired_closure(unsigned n, unsigned m) {
  if (n < 1 || m < 1)
    throw std::invalid_argument("paired family needs N, M >= 1");
  PairedClosureProgram out;

  // Functional side: x bound at N foo-call sites, y at M sites inside
  // use-all; the rightmost lambda closes both.
  std::ostringstream scm;
  scm << "(define (baz x y) 0)\n";
  scm << "(define (foo x) (lambda (y) (lambda (d) (baz x y))))\n";
  scm << "(define (use-all cx)";
  for (unsigned j = 1; j <= m; ++j) scm << " (cx " << 200 + j << ")";
  scm << ")\n";
  for (unsigned i = 1; i <= n; ++i)
    scm << "(use-all (foo " << 100 + i << "))\n";
  out.scheme_source = scm.str();
  out.cps_program = cps_convert(out.scheme_source);
  out.functional_closure_lambda =
      find_lambda_with_param(*out.cps_program, "d");

  // OO side: the same call structure with an explicit two-field closure.
  std::ostringstream fj;
  fj << "class Tag extends Object { Tag() { super(); } }\n";
  fj << "class X extends Object { Tag t; X(Tag t) { super(); this.t = t; } }\n";
  fj << "class Y extends Object { Tag t; Y(Tag t) { super(); this.t = t; } }\n";
  fj << "class W extends Object { W() { super(); } }\n";
  fj << "class ClosureXY extends Object {\n"
        "  X x; Y y;\n"
        "  ClosureXY(X x, Y y) { super(); this.x = x; this.y = y; }\n"
        "  W baz() { X a; Y b; W w; a = this.x; b = this.y; w = new W(); "
        "return w; }\n"
        "}\n";
  fj << "class ClosureX extends Object {\n"
        "  X x;\n"
        "  ClosureX(X x) { super(); this.x = x; }\n"
        "  ClosureXY bar(Y y) { X a; ClosureXY c; a = this.x; "
        "c = new ClosureXY(a, y); return c; }\n"
        "}\n";
  fj << "class Main extends Object {\n  Main() { super(); }\n";
  fj << "  ClosureX foo(X x) { ClosureX c; c = new ClosureX(x); return c; }\n";
  fj << "  W useAll(ClosureX cx";
  for (unsigned j = 1; j <= m; ++j) fj << ", Y y" << j;
  fj << ") {\n";
  for (unsigned j = 1; j <= m; ++j)
    fj << "    ClosureXY c" << j << "; W w" << j << ";\n";
  for (unsigned j = 1; j <= m; ++j) {
    fj << "    c" << j << " = cx.bar(y" << j << ");\n";
    fj << "    w" << j << " = c" << j << ".baz();\n";
  }
  fj << "    return w" << m << ";\n  }\n}\n";
  fj << "main {\n  Tag g; Main mn;\n";
  for (unsigned i = 1; i <= n; ++i) fj << "  X x" << i << ";\n";
  for (unsigned j = 1; j <= m; ++j) fj << "  Y y" << j << ";\n";
  for (unsigned i = 1; i <= n; ++i)
    fj << "  ClosureX cx" << i << "; W r" << i << ";\n";
  fj << "  g = new Tag();\n  mn = new Main();\n";
  for (unsigned i = 1; i <= n; ++i) fj << "  x" << i << " = new X(g);\n";
  for (unsigned j = 1; j <= m; ++j) fj << "  y" << j << " = new Y(g);\n";
  for (unsigned i = 1; i <= n; ++i)
    fj << "  cx" << i << " = mn.foo(x" << i << ");\n";
  for (unsigned i = 1; i <= n; ++i) {
    fj << "  r" << i << " = mn.useAll(cx" << i;
    for (unsigned j = 1; j <= m; ++j) fj << ", y" << j;
    fj << ");\n";
  }
  fj << "  return r" << n << ";\n}\n";
  out.fj_source = fj.str();
  out.fj_program = fj::parse_fj(out.fj_source);
  for (const fj::MethodDecl& md : out.fj_program->methods())
    if (md.name == "baz") out.baz_entry = md.entry;
  return out;
}

IdentityProgram gen_identity(bool with_intervening) {
  IdentityProgram out;
  if (with_intervening) {
    out.scheme_source =
        "(define (do-something) 0)\n"
        "(define (id x) (do-something) x)\n"
        "(id 3)\n(id 4)\n";
  } else {
    out.scheme_source = "(define (id x) x)\n(id 3)\n(id 4)\n";
  }
  out.program = cps_convert(out.scheme_source);
  return out;
}

std::size_t count_envs_for_lambda(const FlowReport& report, Label lam) {
  return report.env_count(lam);
}

std::size_t inlinable_calls(const FlowReport& report) {
  std::size_t count = 0;
  for (const auto& [label, flow] : report.operator_flow) {
    if (flow.size() != 1) continue;
    const std::string& v = *flow.begin();
    // A singleton lambda, dispatch target, or the (unique) halt
    // continuation supports inlining; a constant does not.
    if (v.rfind("int#", 0) == 0) continue;
    count++;
  }
  return count;
}

std::string AnalysisSpec::display() const {
  switch (kind) {
    case AnalysisKind::Kcfa:
      return "kcfa";
    case AnalysisKind::Mcfa:
      return "mcfa";
    case AnalysisKind::PolyKcfa:
      return "polykcfa";
    case AnalysisKind::FjKcfa:
      return "fj-kcfa";
  }
  return "?";
}

std::vector<AnalysisSpec> parse_analyses(const std::string& text) {
  std::vector<AnalysisSpec> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    auto colon = item.find(':');
    if (colon == std::string::npos)
      throw std::invalid_argument("analysis spec needs kind:depth, got '" +
                                  item + "'");
    std::string kind = item.substr(0, colon);
    AnalysisSpec spec;
    if (kind == "kcfa")
      spec.kind = AnalysisKind::Kcfa;
    else if (kind == "mcfa")
      spec.kind = AnalysisKind::Mcfa;
    else if (kind == "polykcfa")
      spec.kind = AnalysisKind::PolyKcfa;
    else if (kind == "fj-kcfa")
      spec.kind = AnalysisKind::FjKcfa;
    else
      throw std::invalid_argument("unknown analysis '" + kind + "'");
    spec.k_or_m =
        static_cast<unsigned>(std::stoul(item.substr(colon + 1)));
    out.push_back(spec);
  }
  return out;
}

namespace {

MetricsRow run_cell(const BenchProgramSource& prog, const AnalysisSpec& spec,
                    const CellBudget& budget) {
  MetricsRow row;
  row.program = prog.id;
  row.analysis = spec.display();
  row.k_or_m = spec.k_or_m;

  EngineOptions engine;
  engine.max_transfers = budget.transfers;
  engine.deadline_ms = budget.wall_ms;

  if (spec.kind == AnalysisKind::FjKcfa) {
    auto p = fj::parse_fj(prog.fj_source);
    fj::Options opts;
    opts.k = spec.k_or_m;
    auto start = std::chrono::steady_clock::now();
    fj::Result r = fj::explore_widened_fj(*p, opts, engine);
    row.time_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - start)
                      .count();
    row.report = fj::build_report(*p, r);
  } else {
    auto p = cps_convert(prog.scheme_source);
    auto start = std::chrono::steady_clock::now();
    if (spec.kind == AnalysisKind::Kcfa) {
      kcfa::Result r = kcfa::explore_widened(*p, spec.k_or_m, engine);
      row.report = kcfa::build_report(*p, r);
    } else {
      mcfa::Policy policy = spec.kind == AnalysisKind::Mcfa
                                ? mcfa::Policy::TopMFrames
                                : mcfa::Policy::LastKCalls;
      mcfa::Result r =
          mcfa::explore_widened(*p, spec.k_or_m, policy, engine);
      row.report = mcfa::build_report(*p, r);
    }
    row.time_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - start)
                      .count();
  }
  row.terms = row.report.term_count;
  row.policy = row.report.policy;
  row.transfers = row.report.iterations;
  row.configs = row.report.config_count;
  row.inlinable = inlinable_calls(row.report);
  row.timeout = row.report.partial;
  return row;
}

}  // namespace

std::vector<MetricsRow> run_matrix(
    const std::vector<BenchProgramSource>& programs,
    const std::vector<AnalysisSpec>& analyses, const CellBudget& budget,
    unsigned jobs) {
  struct Cell {
    const BenchProgramSource* prog;
    const AnalysisSpec* spec;
  };
  std::vector<Cell> cells;
  for (const auto& prog : programs) {
    for (const auto& spec : analyses) {
      bool is_fj = spec.kind == AnalysisKind::FjKcfa;
      if (is_fj && prog.fj_source.empty()) continue;
      if (!is_fj && prog.scheme_source.empty()) continue;
      cells.push_back(Cell{&prog, &spec});
    }
  }

  std::vector<MetricsRow> rows(cells.size());
  if (jobs <= 1) {
    for (std::size_t i = 0; i < cells.size(); ++i)
      rows[i] = run_cell(*cells[i].prog, *cells[i].spec, budget);
    return rows;
  }
  // Each cell owns its parse and its analysis state; rows land at fixed
  // indices, so the output order is independent of scheduling.
  std::atomic<std::size_t> next{0};
  std::vector<std::future<void>> workers;
  for (unsigned j = 0; j < jobs; ++j) {
    workers.push_back(std::async(std::launch::async, [&] {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= cells.size()) return;
        rows[i] = run_cell(*cells[i].prog, *cells[i].spec, budget);
      }
    }));
  }
  for (auto& w : workers) w.get();
  return rows;
}

std::string matrix_csv(const std::vector<MetricsRow>& rows) {
  std::ostringstream out;
  out << "program,terms,analysis,k_or_m,policy,transfers,configs,inlinable,"
         "time_ms,timeout\n";
  for (const MetricsRow& r : rows) {
    out << r.program << ',' << r.terms << ',' << r.analysis << ','
        << r.k_or_m << ',' << r.policy << ',' << r.transfers << ','
        << r.configs << ',' << r.inlinable << ',' << std::fixed
        << std::setprecision(1) << r.time_ms << ','
        << (r.timeout ? "true" : "false") << '\n';
  }
  return out.str();
}

nlohmann::json matrix_json(const std::vector<MetricsRow>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const MetricsRow& r : rows) {
    nlohmann::json j;
    j["program"] = r.program;
    j["terms"] = r.terms;
    j["analysis"] = r.analysis;
    j["k_or_m"] = r.k_or_m;
    j["policy"] = r.policy;
    j["transfers"] = r.transfers;
    j["configs"] = r.configs;
    j["inlinable"] = r.inlinable;
    j["time_ms"] = r.time_ms;
    j["timeout"] = r.timeout;
    arr.push_back(std::move(j));
  }
  return arr;
}

std::vector<BenchProgramSource> family_programs(const std::string& family,
                                                unsigned lo, unsigned hi) {
  std::vector<BenchProgramSource> out;
  if (family == "worst-case") {
    for (unsigned n = lo; n <= hi; ++n) {
      WorstCaseProgram w = gen_worst_case(n);
      out.push_back(BenchProgramSource{"worst-case-" + std::to_string(n),
                                       w.scheme_source, ""});
    }
    return out;
  }
  if (family == "paired-closure") {
    for (unsigned n = lo; n <= hi; ++n) {
      PairedClosureProgram p = gen_paired_closure(n, n);
      out.push_back(BenchProgramSource{"paired-" + std::to_string(n) + "x" +
                                           std::to_string(n),
                                       p.scheme_source, p.fj_source});
    }
    return out;
  }
  if (family == "identity") {
    out.push_back(BenchProgramSource{
        "identity", gen_identity(false).scheme_source, ""});
    out.push_back(BenchProgramSource{
        "identity-ds", gen_identity(true).scheme_source, ""});
    return out;
  }
  throw std::invalid_argument("unknown family '" + family + "'");
}

}  // namespace cfa::bench
