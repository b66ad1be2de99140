#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <map>
#include <random>
#include <set>
#include <vector>

namespace cfa {

/// Join-semilattice store: addresses to sets of abstract values. Writes are
/// joins; the store only grows.
template <class Addr, class Val>
struct JoinStore {
  std::map<Addr, std::set<Val>> entries;

  // Returns true when the store actually grew.
  bool join(const Addr& a, const std::set<Val>& vals) {
    if (vals.empty()) return false;
    auto& slot = entries[a];
    std::size_t before = slot.size();
    slot.insert(vals.begin(), vals.end());
    return slot.size() != before;
  }

  const std::set<Val>& at(const Addr& a) const {
    static const std::set<Val> empty;
    auto it = entries.find(a);
    return it == entries.end() ? empty : it->second;
  }

  // Pointwise: every entry of `other` is contained in this store.
  bool subsumes(const JoinStore& other) const {
    for (const auto& [a, vals] : other.entries) {
      const auto& mine = at(a);
      for (const Val& v : vals)
        if (!mine.count(v)) return false;
    }
    return true;
  }

  auto operator<=>(const JoinStore&) const = default;
};

enum class WorklistOrder { Fifo, Lifo, Random };

struct EngineOptions {
  WorklistOrder order = WorklistOrder::Fifo;
  std::uint64_t seed = 0;             // Random order only
  std::size_t max_transfers = 0;      // 0 = unbounded
  double deadline_ms = 0;             // 0 = unbounded
};

struct EngineMetrics {
  std::size_t transfers = 0;
  std::size_t store_join_events = 0;
  double time_ms = 0;
  bool budget_exceeded = false;
};

/// One successor of an abstract transition, carrying the store bindings that
/// transition performs. The widened engine joins the bindings into the one
/// global store; a naive explorer can apply them per branch instead.
template <class Config, class Addr, class Val>
struct Successor {
  Config config;
  std::vector<std::pair<Addr, std::set<Val>>> writes;
};

template <class Config, class Addr, class Val>
struct StepOutcome {
  std::vector<Successor<Config, Addr, Val>> successors;
  std::vector<Addr> reads;   // addresses this transition depended on
  std::set<Val> halt_flow;   // values applied to the halt continuation
};

template <class Config, class Addr, class Val>
struct WidenedSpace {
  std::set<Config> configs;
  JoinStore<Addr, Val> store;
  std::set<Val> final_flow;
  EngineMetrics metrics;
};

/// Single-threaded-store worklist fixpoint. `Analysis` provides:
///   initial_configs() -> std::vector<Config>
///   seed_store(JoinStore&)
///   step(const Config&, const JoinStore&) -> StepOutcome
/// The transfer function is monotone into a finite lattice, so the result is
/// independent of worklist order.
template <class Analysis, class Config, class Addr, class Val>
WidenedSpace<Config, Addr, Val> solve_widened(Analysis& analysis,
                                              const EngineOptions& opts = {}) {
  using Clock = std::chrono::steady_clock;
  auto start = Clock::now();
  auto elapsed_ms = [&] {
    return std::chrono::duration<double, std::milli>(Clock::now() - start)
        .count();
  };

  WidenedSpace<Config, Addr, Val> space;
  std::deque<Config> worklist;
  std::set<Config> queued;
  std::map<Addr, std::set<Config>> readers;
  std::mt19937_64 rng(opts.seed);

  auto enqueue = [&](const Config& c) {
    if (queued.insert(c).second) worklist.push_back(c);
  };

  analysis.seed_store(space.store);
  for (const Config& c : analysis.initial_configs()) {
    space.configs.insert(c);
    enqueue(c);
  }

  while (!worklist.empty()) {
    if (opts.max_transfers && space.metrics.transfers >= opts.max_transfers) {
      space.metrics.budget_exceeded = true;
      break;
    }
    if (opts.deadline_ms > 0 && elapsed_ms() > opts.deadline_ms) {
      space.metrics.budget_exceeded = true;
      break;
    }

    Config current;
    switch (opts.order) {
      case WorklistOrder::Fifo:
        current = worklist.front();
        worklist.pop_front();
        break;
      case WorklistOrder::Lifo:
        current = worklist.back();
        worklist.pop_back();
        break;
      case WorklistOrder::Random: {
        std::uniform_int_distribution<std::size_t> pick(0,
                                                        worklist.size() - 1);
        std::size_t i = pick(rng);
        current = worklist[i];
        worklist.erase(worklist.begin() + static_cast<std::ptrdiff_t>(i));
        break;
      }
    }
    queued.erase(current);
    space.metrics.transfers++;

    auto out = analysis.step(current, space.store);
    for (const Addr& a : out.reads) readers[a].insert(current);
    for (const Val& v : out.halt_flow) space.final_flow.insert(v);

    std::vector<Addr> grown;
    for (auto& succ : out.successors) {
      for (auto& [addr, flow] : succ.writes) {
        if (space.store.join(addr, flow)) {
          space.metrics.store_join_events++;
          grown.push_back(addr);
        }
      }
      if (space.configs.insert(succ.config).second) enqueue(succ.config);
    }
    // A grown address invalidates every config that read it.
    for (const Addr& a : grown) {
      auto it = readers.find(a);
      if (it == readers.end()) continue;
      for (const Config& c : it->second) enqueue(c);
    }
  }

  space.metrics.time_ms = elapsed_ms();
  return space;
}

/// One more application of the transfer function over the whole space; true
/// when nothing changes (the space is a fixpoint).
template <class Analysis, class Config, class Addr, class Val>
bool verify_fixpoint(Analysis& analysis,
                     const WidenedSpace<Config, Addr, Val>& space) {
  for (const Config& c : space.configs) {
    auto out = analysis.step(c, space.store);
    for (const Val& v : out.halt_flow)
      if (!space.final_flow.count(v)) return false;
    for (const auto& succ : out.successors) {
      if (!space.configs.count(succ.config)) return false;
      for (const auto& [addr, flow] : succ.writes) {
        const auto& have = space.store.at(addr);
        for (const Val& v : flow)
          if (!have.count(v)) return false;
      }
    }
  }
  return true;
}

}  // namespace cfa
