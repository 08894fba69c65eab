#pragma once

#include <string>

#include "drccmdp/ambiguity.hpp"
#include "drccmdp/solution.hpp"
#include "drccmdp/validation.hpp"

namespace drccmdp {

/// MDP JSON schema:
///   {"n_states": n, "actions": [[labels...]...], "transition": [[s,a,s',p]...],
///    "alpha": a, "gamma": [...]}
/// with 0-based state and action indices. Parsing rejects models whose
/// transition rows or initial distribution do not normalize.
MdpModel mdp_from_json(const std::string& text);
std::string mdp_to_json(const MdpModel& mdp);

/// Ambiguity JSON, dispatched on "kind":
///   moments:     {"kind":"D1|D2|D3","mu":[...],"sigma":[[...]],"delta0":..,
///                 "delta1":..,"delta2":..,"support":"full|nonneg","epsilon":..}
///   phi:         {"kind":"phi","divergence":"kl|variation|mchi2|hellinger",
///                 "theta":..,"epsilon":..,"mu_nu":[...],"sigma_nu":[[...]]}
///   wasserstein: {"kind":"wasserstein","theta":..,"epsilon":..,
///                 "support":"full|nonneg","scenarios_csv":"path"}
///   gaussian:    {"kind":"gaussian","mu":[...],"sigma":[[...]],"epsilon":..}
///   nominal:     {"kind":"nominal","reward":[...]}
AmbiguitySpec ambiguity_from_json(const std::string& text);

/// Scenario CSV: header of flattened (s,a) labels, one row per scenario.
std::string scenarios_to_csv(const ScenarioSet& set, const std::vector<std::string>& labels);
ScenarioSet scenarios_from_csv(const std::string& text);

std::string solution_to_json(const DrccmdpSolution& sol);
DrccmdpSolution solution_from_json(const std::string& text);

std::string report_to_json(const ValidationReport& rep);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace drccmdp
