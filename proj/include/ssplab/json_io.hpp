#pragma once

#include <string>
#include <vector>

#include "ssplab/mdp.hpp"

namespace ssplab {

/// Parses an MDP from its JSON document form:
///   {"states": [names], "initial": name, "goal": name,
///    "actions": {state: [action names]},
///    "transitions": {state: {action: [[next_or_goal_name, prob], ...]}}}
/// Probabilities are validated on load. Throws ParseError.
SspMdp mdp_from_json(const std::string& text, bool lenient = false);
SspMdp load_mdp(const std::string& path, bool lenient = false);

std::string mdp_to_json(const SspMdp& mdp);
void save_mdp(const SspMdp& mdp, const std::string& path);

/// Cost-sequence file: JSON array of K objects mapping "(state,action)"
/// to a value in [0, 1].
std::vector<CostFunction> costs_from_json(const SspMdp& mdp, const std::string& text);
std::vector<CostFunction> load_costs(const SspMdp& mdp, const std::string& path);
std::string costs_to_json(const SspMdp& mdp, const std::vector<CostFunction>& costs);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace ssplab
