#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cfa/cps_ast.hpp"
#include "cfa/fj_ast.hpp"
#include "cfa/flow_report.hpp"

namespace cfa::bench {

// ---- Benchmark program generators ----

struct WorstCaseProgram {
  std::string scheme_source;
  CpsProgramPtr program;
  Label inner_lambda;  // the lambda closing over all n variables
};

/// The worst-case family: each x_i is bound at two call sites, so the
/// innermost lambda closes over n independently-split variables.
WorstCaseProgram gen_worst_case(unsigned n);

struct PairedClosureProgram {
  std::string fj_source;
  std::string scheme_source;
  fj::FjProgramPtr fj_program;
  CpsProgramPtr cps_program;
  Label functional_closure_lambda;  // rightmost lambda closing x and y
  fj::Label baz_entry;              // entry statement of the OO baz
};

/// The paired example: explicit closure objects on the OO side versus
/// implicit nested closures on the functional side, with N x-bindings and
/// M y-bindings flowing through shared helpers.
PairedClosureProgram gen_paired_closure(unsigned n, unsigned m);

struct IdentityProgram {
  std::string scheme_source;
  CpsProgramPtr program;
};

/// (id 3) then (id 4), optionally with an intervening call in id's body.
IdentityProgram gen_identity(bool with_intervening);

// ---- Precision metrics over flow reports ----

/// Distinct environments paired with the lambda (or FJ method entry) across
/// flow sets and configurations. Throws std::out_of_range on unknown labels.
std::size_t count_envs_for_lambda(const FlowReport& report, Label lam);

/// Call sites whose operator flow is a singleton callable: one lambda, one
/// dispatch target, or the halt continuation.
std::size_t inlinable_calls(const FlowReport& report);

// ---- Benchmark matrix ----

enum class AnalysisKind { Kcfa, Mcfa, PolyKcfa, FjKcfa };

struct AnalysisSpec {
  AnalysisKind kind = AnalysisKind::Kcfa;
  unsigned k_or_m = 0;

  std::string display() const;
};

/// Parses "kcfa:1,mcfa:1,polykcfa:1,kcfa:0".
std::vector<AnalysisSpec> parse_analyses(const std::string& text);

struct BenchProgramSource {
  std::string id;
  std::string scheme_source;  // CPS-side programs
  std::string fj_source;      // OO-side programs (may be empty)
};

struct CellBudget {
  double wall_ms = 0;          // 0 = unbounded
  std::size_t transfers = 0;   // 0 = unbounded
};

struct MetricsRow {
  std::string program;
  std::size_t terms = 0;
  std::string analysis;
  unsigned k_or_m = 0;
  std::string policy;
  std::size_t transfers = 0;
  std::size_t configs = 0;
  std::size_t inlinable = 0;
  double time_ms = 0;
  bool timeout = false;
  FlowReport report;
};

/// One row per (program, analysis); a timed-out cell is marked, its partial
/// metrics retained. FJ analyses run on the fj source, the rest on the
/// scheme source; cells missing the needed source are skipped.
std::vector<MetricsRow> run_matrix(const std::vector<BenchProgramSource>& programs,
                                   const std::vector<AnalysisSpec>& analyses,
                                   const CellBudget& budget, unsigned jobs = 1);

std::string matrix_csv(const std::vector<MetricsRow>& rows);
nlohmann::json matrix_json(const std::vector<MetricsRow>& rows);

/// The named generated families used by the CLI and the acceptance suite.
std::vector<BenchProgramSource> family_programs(const std::string& family,
                                                unsigned lo, unsigned hi);

}  // namespace cfa::bench
