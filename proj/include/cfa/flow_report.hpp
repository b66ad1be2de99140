#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>

#include <json.hpp>

#include "cfa/cps_ast.hpp"

namespace cfa {

/// Analysis result in presentation form: per-label operator flow sets,
/// per-address value sets, environment fingerprints per lambda (per method
/// entry for FJ), and the values that reached the halt continuation. All
/// sets are plain sorted strings so reports from different analyses and
/// environment representations compare bytewise.
struct FlowReport {
  std::string analysis;  // kcfa | mcfa | polykcfa | fj-kcfa
  unsigned k_or_m = 0;
  std::string policy;  // "", "top-m-frames", "last-k-calls"

  std::map<Label, std::set<std::string>> operator_flow;
  std::map<std::string, std::set<std::string>> addresses;
  // Key: lambda label (CPS) or method entry-statement label (FJ). Every
  // lambda/method of the program is present, possibly with an empty set.
  std::map<Label, std::set<std::string>> env_fingerprints;
  // FJ only: context fingerprint -> variable -> abstract objects.
  std::map<std::string, std::map<std::string, std::set<std::string>>>
      points_to;
  std::set<std::string> final_flow;

  std::size_t config_count = 0;
  std::size_t iterations = 0;
  std::size_t store_join_events = 0;
  std::size_t term_count = 0;
  bool partial = false;

  std::size_t env_count(Label lam) const;

  /// Deterministic JSON: std::map ordering everywhere, no wall-clock times.
  nlohmann::json to_json() const;
};

}  // namespace cfa
