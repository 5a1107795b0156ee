#pragma once

// Test-side oracles, independent of the library's planning paths.

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "ssplab/mdp.hpp"
#include "ssplab/rng.hpp"

namespace ssplab::oracles {

/// All deterministic policies of an MDP by exhaustive enumeration.
inline std::vector<std::vector<int>> all_deterministic_policies(const SspMdp& mdp) {
    std::vector<std::vector<int>> out;
    std::vector<int> cur(mdp.num_states(), 0);
    while (true) {
        out.push_back(cur);
        int s = 0;
        while (s < mdp.num_states()) {
            if (++cur[s] < mdp.num_actions(s)) break;
            cur[s] = 0;
            ++s;
        }
        if (s == mdp.num_states()) break;
    }
    return out;
}

struct EnumeratedBest {
    std::vector<int> actions;
    double total_cost = std::numeric_limits<double>::infinity();
};

/// Best deterministic proper policy by brute force: filters proper
/// policies via the hitting-time solve and evaluates the cost-to-go at
/// the initial state under the mean cost.
inline std::optional<EnumeratedBest> enumerate_best_policy(const SspMdp& mdp,
                                                           const CostFunction& mean_cost,
                                                           double episodes) {
    std::optional<EnumeratedBest> best;
    for (const auto& actions : all_deterministic_policies(mdp)) {
        StationaryPolicy pol = StationaryPolicy::deterministic(mdp, actions);
        try {
            compute_hitting_times(mdp, pol);  // proper filter
        } catch (const ImproperPolicyError&) {
            continue;
        }
        std::vector<double> j = compute_cost_to_go(mdp, pol, mean_cost);
        double total = episodes * j[mdp.initial_state()];
        if (!best || total < best->total_cost) best = EnumeratedBest{actions, total};
    }
    return best;
}

/// Random MDP with every action keeping at least `goal_prob` mass on the
/// goal, so that every policy is proper.
inline SspMdp random_mdp(int states, int max_actions, std::uint64_t seed,
                         double goal_prob = 0.05) {
    Rng rng(seed);
    std::vector<std::vector<std::vector<Transition>>> rows(states);
    for (int s = 0; s < states; ++s) {
        int na = 1 + static_cast<int>(rng.uniform() * max_actions);
        if (na > max_actions) na = max_actions;
        rows[s].resize(na);
        for (int a = 0; a < na; ++a) {
            std::vector<double> w = rng.simplex(states + 1);
            double scale = 1.0 - goal_prob;
            std::vector<Transition> row;
            for (int t = 0; t < states; ++t)
                if (w[t] > 0.0) row.push_back({t, scale * w[t]});
            row.push_back({kGoal, goal_prob + scale * w[states]});
            rows[s][a] = std::move(row);
        }
    }
    return SspMdp(0, std::move(rows));
}

inline CostFunction random_cost(const SspMdp& mdp, std::uint64_t seed, double lo = 0.0,
                                double hi = 1.0) {
    Rng rng(seed);
    CostFunction c;
    c.values.resize(mdp.num_pairs());
    for (auto& v : c.values) v = rng.uniform(lo, hi);
    return c;
}

inline StationaryPolicy random_policy(const SspMdp& mdp, std::uint64_t seed) {
    Rng rng(seed);
    StationaryPolicy p;
    p.probs.resize(mdp.num_states());
    for (int s = 0; s < mdp.num_states(); ++s) p.probs[s] = rng.simplex(mdp.num_actions(s));
    return p;
}

/// Streaming mean / standard-error accumulator.
struct MeanSe {
    long n = 0;
    double mean = 0.0;
    double m2 = 0.0;
    void add(double x) {
        ++n;
        double d = x - mean;
        mean += d / n;
        m2 += d * (x - mean);
    }
    double se() const { return n > 1 ? std::sqrt(m2 / (n - 1) / n) : 0.0; }
};

}  // namespace ssplab::oracles
