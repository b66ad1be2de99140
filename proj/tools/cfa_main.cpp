// cfa: control-flow analyses for CPS/Scheme-subset and A-Normal
// Featherweight Java programs, plus a benchmark matrix runner.
//
// Exit status: 0 success; 2 input/usage error (no report emitted);
// 3 budget exhaustion (partial report emitted with "partial": true).

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "cfa/bench.hpp"
#include "cfa/cps_kcfa.hpp"
#include "cfa/fj_kcfa.hpp"
#include "cfa/mcfa.hpp"
#include "cfa/scheme_to_cps.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInputError = 2;
constexpr int kExitBudget = 3;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct AnalyzeArgs {
  std::string lang;      // cps | scheme | fj
  std::string analysis;  // kcfa | mcfa | polykcfa | fj-kcfa
  unsigned k = 0;
  unsigned m = 0;
  bool k_set = false;
  bool m_set = false;
  bool collapsed = false;
  bool call_site_only_tick = false;
  bool strict_cast = false;
  std::string format = "json";
  double budget_ms = 0;
  std::size_t budget_transfers = 0;
  std::string path;
};

void validate_analyze(const AnalyzeArgs& a) {
  bool fj_lang = a.lang == "fj";
  bool fj_analysis = a.analysis == "fj-kcfa";
  if (fj_lang != fj_analysis)
    throw CLI::ValidationError(
        "analysis '" + a.analysis + "' is incompatible with --lang " +
        a.lang);
  if (a.analysis == "kcfa" || a.analysis == "fj-kcfa") {
    if (a.m_set)
      throw CLI::ValidationError("--m applies to mcfa/polykcfa; use --k");
  } else {
    if (a.k_set)
      throw CLI::ValidationError("--k applies to kcfa/fj-kcfa; use --m");
  }
  if (!fj_analysis && (a.collapsed || a.call_site_only_tick || a.strict_cast))
    throw CLI::ValidationError(
        "--collapsed/--call-site-only-tick/--strict-cast apply to fj-kcfa "
        "only");
}

std::string report_text(const cfa::FlowReport& r) {
  std::ostringstream out;
  out << r.analysis << " (k_or_m=" << r.k_or_m;
  if (!r.policy.empty()) out << ", policy=" << r.policy;
  out << ")\n";
  out << "configs: " << r.config_count << "  iterations: " << r.iterations
      << "  store joins: " << r.store_join_events << "\n";
  out << "final flow:";
  for (const auto& v : r.final_flow) out << " " << v;
  out << "\n";
  out << "operator flow per label:\n";
  for (const auto& [label, flow] : r.operator_flow) {
    out << "  #" << label << " ->";
    for (const auto& v : flow) out << " " << v;
    out << "\n";
  }
  return out.str();
}

std::string report_csv(const cfa::FlowReport& r,
                       const std::string& program_id) {
  cfa::bench::MetricsRow row;
  row.program = program_id;
  row.terms = r.term_count;
  row.analysis = r.analysis;
  row.k_or_m = r.k_or_m;
  row.policy = r.policy;
  row.transfers = r.iterations;
  row.configs = r.config_count;
  row.inlinable = cfa::bench::inlinable_calls(r);
  row.timeout = r.partial;
  row.report = r;
  return cfa::bench::matrix_csv({row});
}

int run_analyze(const AnalyzeArgs& args) {
  cfa::EngineOptions engine;
  engine.deadline_ms = args.budget_ms;
  engine.max_transfers = args.budget_transfers;

  std::string source = read_file(args.path);
  cfa::FlowReport report;

  if (args.analysis == "fj-kcfa") {
    auto program = cfa::fj::parse_fj(source);
    cfa::fj::Options opts;
    opts.k = args.k;
    opts.env_mode = args.collapsed ? cfa::fj::EnvMode::Collapsed
                                   : cfa::fj::EnvMode::Map;
    opts.tick_mode = args.call_site_only_tick
                         ? cfa::fj::TickMode::CallSiteOnly
                         : cfa::fj::TickMode::PerStatement;
    opts.strict_cast = args.strict_cast;
    auto result = cfa::fj::explore_widened_fj(*program, opts, engine);
    report = cfa::fj::build_report(*program, result);
  } else {
    cfa::CpsProgramPtr program = args.lang == "cps"
                                     ? cfa::parse_cps(source)
                                     : cfa::cps_convert(source);
    if (args.analysis == "kcfa") {
      auto result = cfa::kcfa::explore_widened(*program, args.k, engine);
      report = cfa::kcfa::build_report(*program, result);
    } else {
      auto policy = args.analysis == "mcfa"
                        ? cfa::mcfa::Policy::TopMFrames
                        : cfa::mcfa::Policy::LastKCalls;
      auto result =
          cfa::mcfa::explore_widened(*program, args.m, policy, engine);
      report = cfa::mcfa::build_report(*program, result);
    }
  }

  if (args.format == "json")
    std::cout << report.to_json().dump(2) << "\n";
  else if (args.format == "csv")
    std::cout << report_csv(report, args.path);
  else
    std::cout << report_text(report);
  return report.partial ? kExitBudget : kExitOk;
}

struct BenchArgs {
  std::string family = "worst-case";
  std::string range = "1..4";
  std::string analyses = "kcfa:1,mcfa:1,polykcfa:1,kcfa:0";
  std::string format = "csv";
  unsigned jobs = 1;
  double budget_ms = 0;
  std::size_t budget_transfers = 0;
};

std::pair<unsigned, unsigned> parse_range(const std::string& text) {
  auto dots = text.find("..");
  if (dots == std::string::npos) {
    unsigned v = static_cast<unsigned>(std::stoul(text));
    return {v, v};
  }
  unsigned lo = static_cast<unsigned>(std::stoul(text.substr(0, dots)));
  unsigned hi = static_cast<unsigned>(std::stoul(text.substr(dots + 2)));
  if (hi < lo) throw std::invalid_argument("empty range " + text);
  return {lo, hi};
}

int run_bench(const BenchArgs& args) {
  auto [lo, hi] = parse_range(args.range);
  auto programs = cfa::bench::family_programs(args.family, lo, hi);
  auto analyses = cfa::bench::parse_analyses(args.analyses);

  cfa::bench::CellBudget budget;
  budget.wall_ms = args.budget_ms;
  budget.transfers = args.budget_transfers;
  if (budget.wall_ms == 0) {
    if (const char* env = std::getenv("CFA_BUDGET_MS"))
      budget.wall_ms = std::atof(env);
  }

  auto rows = cfa::bench::run_matrix(programs, analyses, budget, args.jobs);
  if (args.format == "json")
    std::cout << cfa::bench::matrix_json(rows).dump(2) << "\n";
  else
    std::cout << cfa::bench::matrix_csv(rows);
  for (const auto& row : rows)
    if (row.timeout) return kExitBudget;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Control-flow analysis workbench: k-CFA and m-CFA for a "
               "CPS/Scheme subset, k-CFA for A-Normal Featherweight Java"};
  app.require_subcommand(1);

  AnalyzeArgs aa;
  CLI::App* analyze = app.add_subcommand("analyze", "Analyze one program");
  analyze->add_option("--lang", aa.lang, "cps | scheme | fj")->required();
  analyze->add_option("--analysis", aa.analysis,
                      "kcfa | mcfa | polykcfa | fj-kcfa")
      ->required()
      ->check(CLI::IsMember({"kcfa", "mcfa", "polykcfa", "fj-kcfa"}));
  analyze->add_option("--k", aa.k, "context depth for kcfa/fj-kcfa")
      ->trigger_on_parse()
      ->each([&aa](const std::string&) { aa.k_set = true; });
  analyze->add_option("--m", aa.m, "context depth for mcfa/polykcfa")
      ->trigger_on_parse()
      ->each([&aa](const std::string&) { aa.m_set = true; });
  analyze->add_flag("--collapsed", aa.collapsed,
                    "collapsed environment representation (fj-kcfa)");
  analyze->add_flag("--call-site-only-tick", aa.call_site_only_tick,
                    "tick only at method invocations (fj-kcfa)");
  analyze->add_flag("--strict-cast", aa.strict_cast,
                    "filter cast flow by subclass (fj-kcfa)");
  analyze->add_option("--format", aa.format, "json | csv | text")
      ->check(CLI::IsMember({"json", "csv", "text"}));
  analyze->add_option("--budget-ms", aa.budget_ms,
                      "wall-clock budget (0 = unbounded)");
  analyze->add_option("--budget-transfers", aa.budget_transfers,
                      "transfer-application budget (0 = unbounded)");
  analyze->add_option("file", aa.path, "input program")->required();

  BenchArgs ba;
  CLI::App* bench = app.add_subcommand("bench", "Run a benchmark matrix");
  bench->add_option("--family", ba.family,
                    "worst-case | paired-closure | identity");
  bench->add_option("--n", ba.range, "size or range, e.g. 1..4");
  bench->add_option("--analyses", ba.analyses,
                    "comma list of kind:depth, e.g. kcfa:1,mcfa:1");
  bench->add_option("--format", ba.format, "csv | json")
      ->check(CLI::IsMember({"csv", "json"}));
  bench->add_option("--jobs", ba.jobs, "parallel cells");
  bench->add_option("--budget-ms", ba.budget_ms,
                    "per-cell wall budget (also CFA_BUDGET_MS)");
  bench->add_option("--budget-transfers", ba.budget_transfers,
                    "per-cell transfer budget");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitInputError;
  }

  try {
    if (*analyze) {
      validate_analyze(aa);
      return run_analyze(aa);
    }
    return run_bench(ba);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const cfa::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInputError;
  }
}
