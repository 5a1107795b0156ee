#include "ssplab/json_io.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace ssplab {

using nlohmann::json;

namespace {

json parse(const std::string& text) {
    json doc = json::parse(text, nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded()) throw ParseError("malformed JSON");
    return doc;
}

}  // namespace

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open file: " + path);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write file: " + path);
    out << content;
}

SspMdp mdp_from_json(const std::string& text, bool lenient) {
    json doc = parse(text);
    try {
        std::vector<std::string> states = doc.at("states").get<std::vector<std::string>>();
        std::string initial = doc.at("initial").get<std::string>();
        std::string goal = doc.at("goal").get<std::string>();

        auto state_index = [&](const std::string& name) -> int {
            for (std::size_t i = 0; i < states.size(); ++i)
                if (states[i] == name) return static_cast<int>(i);
            throw ParseError("unknown state name: " + name);
        };
        for (const auto& s : states)
            if (s == goal) throw ParseError("goal must not be a member of the state set");

        int s0 = state_index(initial);
        std::vector<std::vector<std::string>> action_names(states.size());
        const json& actions = doc.at("actions");
        for (std::size_t s = 0; s < states.size(); ++s) {
            if (!actions.contains(states[s]))
                throw ParseError("no actions listed for state " + states[s]);
            action_names[s] = actions.at(states[s]).get<std::vector<std::string>>();
            if (action_names[s].empty())
                throw ParseError("state " + states[s] + " has an empty action set");
        }

        std::vector<std::vector<std::vector<Transition>>> rows(states.size());
        const json& transitions = doc.at("transitions");
        for (std::size_t s = 0; s < states.size(); ++s) {
            rows[s].resize(action_names[s].size());
            if (!transitions.contains(states[s]))
                throw ParseError("no transitions listed for state " + states[s]);
            const json& per_state = transitions.at(states[s]);
            for (std::size_t a = 0; a < action_names[s].size(); ++a) {
                if (!per_state.contains(action_names[s][a]))
                    throw ParseError("no transition row for (" + states[s] + ", " +
                                     action_names[s][a] + ")");
                for (const auto& entry : per_state.at(action_names[s][a])) {
                    if (!entry.is_array() || entry.size() != 2)
                        throw ParseError("transition entries must be [target, prob] pairs");
                    std::string target = entry[0].get<std::string>();
                    double prob = entry[1].get<double>();
                    int next = (target == goal) ? kGoal : state_index(target);
                    rows[s][a].push_back({next, prob});
                }
            }
        }
        return SspMdp(s0, std::move(rows), std::move(states), std::move(action_names),
                      lenient ? 0.25 : 1e-12);
    } catch (const json::exception& e) {
        throw ParseError(std::string("invalid MDP document: ") + e.what());
    }
}

SspMdp load_mdp(const std::string& path, bool lenient) {
    return mdp_from_json(read_file(path), lenient);
}

std::string mdp_to_json(const SspMdp& mdp) {
    json doc;
    std::vector<std::string> states;
    for (int s = 0; s < mdp.num_states(); ++s) states.push_back(mdp.state_name(s));
    doc["states"] = states;
    doc["initial"] = mdp.state_name(mdp.initial_state());
    doc["goal"] = "goal";
    json actions = json::object();
    json transitions = json::object();
    for (int s = 0; s < mdp.num_states(); ++s) {
        std::vector<std::string> names;
        json per_state = json::object();
        for (int a = 0; a < mdp.num_actions(s); ++a) {
            names.push_back(mdp.action_name(s, a));
            json row = json::array();
            for (const auto& tr : mdp.row(s, a)) {
                std::string target = tr.next == kGoal ? "goal" : mdp.state_name(tr.next);
                row.push_back(json::array({target, tr.prob}));
            }
            per_state[mdp.action_name(s, a)] = row;
        }
        actions[mdp.state_name(s)] = names;
        transitions[mdp.state_name(s)] = per_state;
    }
    doc["actions"] = actions;
    doc["transitions"] = transitions;
    return doc.dump(2);
}

void save_mdp(const SspMdp& mdp, const std::string& path) { write_file(path, mdp_to_json(mdp)); }

std::vector<CostFunction> costs_from_json(const SspMdp& mdp, const std::string& text) {
    json doc = parse(text);
    if (!doc.is_array()) throw ParseError("cost sequence must be a JSON array");
    std::vector<CostFunction> out;
    for (const auto& entry : doc) {
        CostFunction c;
        c.values.assign(mdp.num_pairs(), 0.0);
        for (const auto& [key, value] : entry.items()) {
            if (key.size() < 2 || key.front() != '(' || key.back() != ')')
                throw ParseError("cost key must look like (state,action): " + key);
            auto comma = key.find(',');
            if (comma == std::string::npos)
                throw ParseError("cost key must look like (state,action): " + key);
            std::string sname = key.substr(1, comma - 1);
            std::string aname = key.substr(comma + 1, key.size() - comma - 2);
            auto s = mdp.state_by_name(sname);
            if (!s) throw ParseError("unknown state in cost key: " + sname);
            auto a = mdp.action_by_name(*s, aname);
            if (!a) throw ParseError("unknown action in cost key: " + aname);
            double v = value.get<double>();
            if (v < 0.0 || v > 1.0) throw ParseError("cost outside [0, 1] in key " + key);
            c.values[mdp.pair_index(*s, *a)] = v;
        }
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<CostFunction> load_costs(const SspMdp& mdp, const std::string& path) {
    return costs_from_json(mdp, read_file(path));
}

std::string costs_to_json(const SspMdp& mdp, const std::vector<CostFunction>& costs) {
    json doc = json::array();
    for (const auto& c : costs) {
        json entry = json::object();
        for (int i = 0; i < mdp.num_pairs(); ++i) {
            int s = mdp.pair_state(i);
            int a = mdp.pair_action(i);
            entry["(" + mdp.state_name(s) + "," + mdp.action_name(s, a) + ")"] = c.values[i];
        }
        doc.push_back(entry);
    }
    return doc.dump(2);
}

}  // namespace ssplab
