#include "ssplab/mdp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace ssplab {

namespace {

constexpr double kRowSumTol = 1e-12;
constexpr double kResidualTol = 1e-6;
constexpr double kDivergenceBound = 1e15;

/// Builds the policy transition matrix restricted to the state set,
/// P_pi(s, s') = sum_a pi(a|s) P(s'|s, a).
Eigen::MatrixXd policy_matrix(const SspMdp& mdp, const StationaryPolicy& policy) {
    const int S = mdp.num_states();
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(S, S);
    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < mdp.num_actions(s); ++a) {
            const double w = policy.probs[s][a];
            if (w == 0.0) continue;
            for (const auto& tr : mdp.row(s, a)) {
                if (tr.next != kGoal) P(s, tr.next) += w * tr.prob;
            }
        }
    }
    return P;
}

/// Solves (I - P_pi) x = rhs and rejects non-proper solutions.
Eigen::VectorXd solve_policy_system(const SspMdp& mdp, const StationaryPolicy& policy,
                                    const Eigen::VectorXd& rhs, bool transpose) {
    const int S = mdp.num_states();
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(S, S) - policy_matrix(mdp, policy);
    if (transpose) A.transposeInPlace();
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
    Eigen::VectorXd x = lu.solve(rhs);
    if (!x.allFinite())
        throw ImproperPolicyError("policy linear system has no finite solution");
    double residual = (A * x - rhs).cwiseAbs().maxCoeff();
    if (residual > kResidualTol)
        throw ImproperPolicyError("policy linear system residual " + std::to_string(residual));
    if (x.minCoeff() < -kResidualTol)
        throw ImproperPolicyError("policy linear system yields a negative component");
    return x;
}

}  // namespace

SspMdp::SspMdp(int initial_state, std::vector<std::vector<std::vector<Transition>>> rows,
               std::vector<std::string> state_names,
               std::vector<std::vector<std::string>> action_names, double row_sum_tol)
    : initial_(initial_state), rows_(std::move(rows)) {
    const int S = num_states();
    if (S == 0) throw ParseError("MDP has no states");
    if (initial_ < 0 || initial_ >= S) throw ParseError("initial state out of range");
    pair_offset_.resize(S);
    for (int s = 0; s < S; ++s) {
        pair_offset_[s] = pair_count_;
        if (rows_[s].empty()) throw ParseError("state " + std::to_string(s) + " has no actions");
        for (int a = 0; a < num_actions(s); ++a) {
            double total = 0.0;
            for (const auto& tr : rows_[s][a]) {
                if (tr.prob < 0.0 || tr.prob > 1.0)
                    throw ParseError("transition probability outside [0, 1]");
                if (tr.next != kGoal && (tr.next < 0 || tr.next >= S))
                    throw ParseError("transition target out of range");
                total += tr.prob;
            }
            if (std::abs(total - 1.0) > row_sum_tol)
                throw ParseError("transition row of state " + std::to_string(s) +
                                 " does not sum to 1");
            pair_state_.push_back(s);
            pair_action_.push_back(a);
            ++pair_count_;
        }
    }
    if (state_names.empty()) {
        state_names_.reserve(S);
        for (int s = 0; s < S; ++s) state_names_.push_back("s" + std::to_string(s));
    } else {
        state_names_ = std::move(state_names);
    }
    if (action_names.empty()) {
        action_names_.resize(S);
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < num_actions(s); ++a)
                action_names_[s].push_back("a" + std::to_string(a));
    } else {
        action_names_ = std::move(action_names);
    }
}

std::optional<int> SspMdp::state_by_name(const std::string& name) const {
    for (int s = 0; s < num_states(); ++s)
        if (state_names_[s] == name) return s;
    return std::nullopt;
}

std::optional<int> SspMdp::action_by_name(int s, const std::string& name) const {
    for (int a = 0; a < num_actions(s); ++a)
        if (action_names_[s][a] == name) return a;
    return std::nullopt;
}

StationaryPolicy StationaryPolicy::deterministic(const SspMdp& mdp, const std::vector<int>& actions) {
    StationaryPolicy p;
    p.probs.resize(mdp.num_states());
    for (int s = 0; s < mdp.num_states(); ++s) {
        p.probs[s].assign(mdp.num_actions(s), 0.0);
        p.probs[s][actions[s]] = 1.0;
    }
    return p;
}

StationaryPolicy StationaryPolicy::uniform(const SspMdp& mdp) {
    StationaryPolicy p;
    p.probs.resize(mdp.num_states());
    for (int s = 0; s < mdp.num_states(); ++s)
        p.probs[s].assign(mdp.num_actions(s), 1.0 / mdp.num_actions(s));
    return p;
}

bool StationaryPolicy::is_deterministic() const {
    for (const auto& row : probs)
        for (double v : row)
            if (v != 0.0 && v != 1.0) return false;
    return true;
}

std::vector<int> StationaryPolicy::actions() const {
    std::vector<int> out(probs.size());
    for (std::size_t s = 0; s < probs.size(); ++s) {
        int best = 0;
        for (std::size_t a = 1; a < probs[s].size(); ++a)
            if (probs[s][a] > probs[s][best]) best = static_cast<int>(a);
        out[s] = best;
    }
    return out;
}

void StationaryPolicy::validate(const SspMdp& mdp) const {
    if (static_cast<int>(probs.size()) != mdp.num_states())
        throw ParseError("policy has wrong number of states");
    for (int s = 0; s < mdp.num_states(); ++s) {
        if (static_cast<int>(probs[s].size()) != mdp.num_actions(s))
            throw ParseError("policy row has wrong number of actions");
        double total = 0.0;
        for (double v : probs[s]) {
            if (v < 0.0) throw ParseError("policy has a negative probability");
            total += v;
        }
        if (std::abs(total - 1.0) > kRowSumTol)
            throw ParseError("policy row does not sum to 1");
    }
}

std::vector<double> compute_hitting_times(const SspMdp& mdp, const StationaryPolicy& policy) {
    policy.validate(mdp);
    Eigen::VectorXd rhs = Eigen::VectorXd::Ones(mdp.num_states());
    Eigen::VectorXd t = solve_policy_system(mdp, policy, rhs, /*transpose=*/false);
    return {t.data(), t.data() + t.size()};
}

std::vector<double> compute_cost_to_go(const SspMdp& mdp, const StationaryPolicy& policy,
                                       const CostFunction& cost) {
    policy.validate(mdp);
    const int S = mdp.num_states();
    Eigen::VectorXd c_pi = Eigen::VectorXd::Zero(S);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < mdp.num_actions(s); ++a)
            c_pi(s) += policy.probs[s][a] * cost.values[mdp.pair_index(s, a)];
    Eigen::VectorXd j = solve_policy_system(mdp, policy, c_pi, /*transpose=*/false);
    for (int s = 0; s < S; ++s) j(s) = std::max(j(s), 0.0);
    return {j.data(), j.data() + j.size()};
}

ValueIterationResult ssp_value_iteration(const SspMdp& mdp, const std::vector<double>& cost,
                                         double tol, std::int64_t max_iters) {
    const int S = mdp.num_states();
    ValueIterationResult res;
    res.value.assign(S, 0.0);
    res.greedy.assign(S, 0);
    std::vector<double> next(S, 0.0);
    for (std::int64_t it = 1; it <= max_iters; ++it) {
        double diff = 0.0;
        for (int s = 0; s < S; ++s) {
            double best = std::numeric_limits<double>::infinity();
            int best_a = 0;
            for (int a = 0; a < mdp.num_actions(s); ++a) {
                double v = cost[mdp.pair_index(s, a)];
                for (const auto& tr : mdp.row(s, a))
                    if (tr.next != kGoal) v += tr.prob * res.value[tr.next];
                if (v < best - 1e-15) {  // strict improvement keeps the lowest index on ties
                    best = v;
                    best_a = a;
                }
            }
            next[s] = best;
            res.greedy[s] = best_a;
            diff = std::max(diff, std::abs(next[s] - res.value[s]));
        }
        res.value.swap(next);
        res.iterations = static_cast<int>(std::min<std::int64_t>(it, INT32_MAX));
        if (diff <= tol) return res;
        if (*std::max_element(res.value.begin(), res.value.end()) > kDivergenceBound)
            throw NoProperPolicyError("value iteration diverged");
    }
    throw NoProperPolicyError("value iteration did not converge within the iteration cap");
}

FastPolicyResult compute_fast_policy(const SspMdp& mdp) {
    std::vector<double> unit(mdp.num_pairs(), 1.0);
    ValueIterationResult vi = ssp_value_iteration(mdp, unit);
    FastPolicyResult res;
    res.policy = StationaryPolicy::deterministic(mdp, vi.greedy);
    // Exact hitting times of the greedy policy via the linear solve; value
    // iteration only needs to identify the argmin actions.
    res.hitting_times = compute_hitting_times(mdp, res.policy);
    res.diameter = *std::max_element(res.hitting_times.begin(), res.hitting_times.end());
    return res;
}

BestFixedPolicyResult best_fixed_policy_for_average(const SspMdp& mdp, const CostFunction& mean_cost,
                                                    double episodes) {
    constexpr double kProperEps = 1e-9;
    std::vector<double> perturbed(mean_cost.values);
    for (double& v : perturbed) v += kProperEps;
    ValueIterationResult vi = ssp_value_iteration(mdp, perturbed);
    BestFixedPolicyResult res;
    res.policy = StationaryPolicy::deterministic(mdp, vi.greedy);
    res.value = compute_cost_to_go(mdp, res.policy, mean_cost);
    res.total_cost = episodes * res.value[mdp.initial_state()];
    return res;
}

BestFixedPolicyResult best_fixed_policy(const SspMdp& mdp, const std::vector<CostFunction>& costs) {
    if (costs.empty()) throw ParseError("best_fixed_policy needs at least one cost function");
    CostFunction mean;
    mean.values.assign(mdp.num_pairs(), 0.0);
    for (const auto& c : costs)
        for (int i = 0; i < mdp.num_pairs(); ++i) mean.values[i] += c.values[i];
    for (double& v : mean.values) v /= static_cast<double>(costs.size());
    return best_fixed_policy_for_average(mdp, mean, static_cast<double>(costs.size()));
}

ExecutionPolicy make_stationary_executor(const SspMdp& mdp, StationaryPolicy policy) {
    policy.validate(mdp);
    return [p = std::move(policy)](int state, std::int64_t, Rng& rng) {
        return rng.discrete(p.probs[state]);
    };
}

EpisodeTrace simulate_episode(const SspMdp& mdp, const ExecutionPolicy& policy,
                              const CostFunction& cost, Rng& rng) {
    EpisodeTrace trace;
    trace.visits.assign(mdp.num_pairs(), 0);
    int state = mdp.initial_state();
    for (std::int64_t step = 1; step <= kEpisodeStepCap; ++step) {
        int action = policy(state, step, rng);
        int idx = mdp.pair_index(state, action);
        ++trace.visits[idx];
        ++trace.steps;
        trace.incurred_cost += cost.values[idx];
        const auto& row = mdp.row(state, action);
        double u = rng.uniform();
        double acc = 0.0;
        int next = row.back().next;  // rounding leftovers land on the last entry
        for (const auto& tr : row) {
            acc += tr.prob;
            if (u < acc) {
                next = tr.next;
                break;
            }
        }
        if (next == kGoal) return trace;
        state = next;
    }
    trace.truncated = true;
    return trace;
}

}  // namespace ssplab
