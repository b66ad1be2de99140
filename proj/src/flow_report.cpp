#include "cfa/flow_report.hpp"

#include <stdexcept>

namespace cfa {

std::size_t FlowReport::env_count(Label lam) const {
  auto it = env_fingerprints.find(lam);
  if (it == env_fingerprints.end())
    throw std::out_of_range("unknown lambda/method label " +
                            std::to_string(lam));
  return it->second.size();
}

nlohmann::json FlowReport::to_json() const {
  nlohmann::json j;
  j["analysis"] = analysis;
  j["k_or_m"] = k_or_m;
  if (analysis == "mcfa" || analysis == "polykcfa")
    j["m"] = k_or_m;
  else
    j["k"] = k_or_m;
  if (!policy.empty()) j["policy"] = policy;

  nlohmann::json labels = nlohmann::json::object();
  for (const auto& [label, flow] : operator_flow) {
    nlohmann::json entry;
    entry["operator_flow"] = flow;
    labels[std::to_string(label)] = entry;
  }
  j["labels"] = labels;

  nlohmann::json addrs = nlohmann::json::object();
  for (const auto& [key, vals] : addresses) addrs[key] = vals;
  j["addresses"] = addrs;

  nlohmann::json envs = nlohmann::json::object();
  for (const auto& [label, fps] : env_fingerprints)
    envs[std::to_string(label)] = fps.size();
  j["env_count_per_lambda"] = envs;

  if (analysis == "fj-kcfa") {
    nlohmann::json pts = nlohmann::json::object();
    for (const auto& [ctx, vars] : points_to) {
      nlohmann::json vj = nlohmann::json::object();
      for (const auto& [var, objs] : vars) vj[var] = objs;
      pts[ctx] = vj;
    }
    j["points_to"] = pts;
  }

  j["final_flow"] = final_flow;
  j["config_count"] = config_count;
  j["iterations"] = iterations;
  j["store_join_events"] = store_join_events;
  j["terms"] = term_count;
  j["partial"] = partial;
  return j;
}

}  // namespace cfa
