#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ssplab/errors.hpp"
#include "ssplab/rng.hpp"

namespace ssplab {

/// Sentinel state id for the goal. The goal is not part of the state set.
constexpr int kGoal = -1;

/// One entry of a sparse transition row: successor state (or kGoal) and
/// its probability.
struct Transition {
    int next = kGoal;
    double prob = 0.0;
};

/// Finite stochastic-shortest-path MDP with a distinguished initial state
/// and an absorbing goal outside the state set. Immutable after
/// construction; safe to share read-only across threads.
class SspMdp {
  public:
    /// rows[s][a] is the transition distribution of action a at state s.
    /// Every row must sum to 1 within row_sum_tol (default 1e-12) with
    /// probabilities in [0, 1], and every state must have at least one
    /// action. A loose tolerance is only used by the validation CLI so
    /// that corrupted inputs reach the property suite instead of failing
    /// at parse time.
    SspMdp(int initial_state,
           std::vector<std::vector<std::vector<Transition>>> rows,
           std::vector<std::string> state_names = {},
           std::vector<std::vector<std::string>> action_names = {},
           double row_sum_tol = 1e-12);

    int num_states() const { return static_cast<int>(rows_.size()); }
    int initial_state() const { return initial_; }
    int num_actions(int s) const { return static_cast<int>(rows_[s].size()); }
    /// Number of valid state-action pairs |Gamma| (= S * average actions).
    int num_pairs() const { return pair_count_; }

    const std::vector<Transition>& row(int s, int a) const { return rows_[s][a]; }

    /// Flat index of (s, a) into Gamma. Pairs are ordered by state then action.
    int pair_index(int s, int a) const { return pair_offset_[s] + a; }
    int pair_state(int idx) const { return pair_state_[idx]; }
    int pair_action(int idx) const { return pair_action_[idx]; }

    const std::string& state_name(int s) const { return state_names_[s]; }
    const std::string& action_name(int s, int a) const { return action_names_[s][a]; }
    std::optional<int> state_by_name(const std::string& name) const;
    std::optional<int> action_by_name(int s, const std::string& name) const;

  private:
    int initial_;
    std::vector<std::vector<std::vector<Transition>>> rows_;
    std::vector<int> pair_offset_;
    std::vector<int> pair_state_;
    std::vector<int> pair_action_;
    int pair_count_ = 0;
    std::vector<std::string> state_names_;
    std::vector<std::vector<std::string>> action_names_;
};

/// Cost vector over Gamma with entries in [0, 1].
struct CostFunction {
    std::vector<double> values;

    double operator()(const SspMdp& mdp, int s, int a) const {
        return values[mdp.pair_index(s, a)];
    }
};

/// Per-state action distribution. Rows are nonnegative and sum to 1
/// within 1e-12.
struct StationaryPolicy {
    std::vector<std::vector<double>> probs;

    static StationaryPolicy deterministic(const SspMdp& mdp, const std::vector<int>& actions);
    static StationaryPolicy uniform(const SspMdp& mdp);
    bool is_deterministic() const;
    /// Argmax action per state (valid for deterministic policies).
    std::vector<int> actions() const;
    void validate(const SspMdp& mdp) const;
};

/// Outcome of one simulated episode.
struct EpisodeTrace {
    std::vector<std::int64_t> visits;  // over Gamma
    std::int64_t steps = 0;
    double incurred_cost = 0.0;
    bool truncated = false;
};

/// Hitting-time summary of a policy (typically the hindsight-optimal one).
struct PlanningDiagnostics {
    std::vector<double> hitting_times;  // T^pi(s)
    double diameter = 0.0;              // D
    double tmax = 0.0;                  // max_s T^pi(s)
    double tstar = 0.0;                 // T^pi(s0)
    int smax = 0;                       // argmax state
};

/// Expected hitting times T^pi: solves (I - P_pi) T = 1 by dense LU.
/// Throws ImproperPolicyError when the system is singular or yields a
/// negative / non-finite component (policy not proper).
std::vector<double> compute_hitting_times(const SspMdp& mdp, const StationaryPolicy& policy);

/// Cost-to-go J^pi: solves J = c_pi + P_pi J. Throws ImproperPolicyError.
std::vector<double> compute_cost_to_go(const SspMdp& mdp, const StationaryPolicy& policy,
                                       const CostFunction& cost);

struct FastPolicyResult {
    StationaryPolicy policy;            // pi^f, deterministic
    double diameter = 0.0;              // D = max_s T^{pi^f}(s)
    std::vector<double> hitting_times;  // T^{pi^f}
};

/// Deterministic policy minimizing the expected hitting time from every
/// state simultaneously (value iteration on unit costs, sup-norm 1e-10,
/// ties broken toward the lowest action index), plus the diameter.
/// Throws NoProperPolicyError when value iteration diverges past the cap.
FastPolicyResult compute_fast_policy(const SspMdp& mdp);

struct BestFixedPolicyResult {
    StationaryPolicy policy;    // pi*, deterministic proper
    double total_cost = 0.0;    // sum_k J_k^{pi*}(s0)
    std::vector<double> value;  // J^{pi*} under the average cost
};

/// Best fixed deterministic proper policy in hindsight for the given cost
/// sequence: plans under the average cost (plus a 1e-9 properness
/// perturbation that is removed again when reporting values).
BestFixedPolicyResult best_fixed_policy(const SspMdp& mdp, const std::vector<CostFunction>& costs);

/// Same planner against a single average cost with a given episode count
/// multiplier; used by the harness to avoid materializing cost sums.
BestFixedPolicyResult best_fixed_policy_for_average(const SspMdp& mdp, const CostFunction& mean_cost,
                                                    double episodes);

/// Execution policies map (state, step index within the episode) to an
/// action distribution; stationary policies ignore the step index.
using ExecutionPolicy = std::function<int(int state, std::int64_t step, Rng& rng)>;

ExecutionPolicy make_stationary_executor(const SspMdp& mdp, StationaryPolicy policy);

inline constexpr std::int64_t kEpisodeStepCap = 10'000'000;

/// Samples one episode from the initial state until the goal or the step
/// cap (cap marks truncated=true rather than throwing, so improper
/// learner policies cannot hang the harness).
EpisodeTrace simulate_episode(const SspMdp& mdp, const ExecutionPolicy& policy,
                              const CostFunction& cost, Rng& rng);

struct ValueIterationResult {
    std::vector<double> value;
    std::vector<int> greedy;
    int iterations = 0;
};

/// Min-cost SSP value iteration under the given cost. Diverging values
/// (no proper policy) throw NoProperPolicyError.
ValueIterationResult ssp_value_iteration(const SspMdp& mdp, const std::vector<double>& cost,
                                         double tol = 1e-10, std::int64_t max_iters = 1'000'000);

}  // namespace ssplab
