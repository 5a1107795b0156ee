#include "ssplab/adversaries.hpp"

#include <cmath>
#include <utility>

namespace ssplab {

namespace {

class CyclicAdversary final : public Adversary {
  public:
    explicit CyclicAdversary(std::vector<CostFunction> costs) : costs_(std::move(costs)) {
        if (costs_.empty()) throw ParseError("cyclic adversary needs at least one cost function");
    }
    CostFunction cost(int episode, const PublicHistory&) override {
        return costs_[(episode - 1) % costs_.size()];
    }

  private:
    std::vector<CostFunction> costs_;
};

class RandomAdversary final : public Adversary {
  public:
    RandomAdversary(int pairs, std::uint64_t seed, double lo, double hi)
        : pairs_(pairs), seed_(seed), lo_(lo), hi_(hi) {}
    CostFunction cost(int episode, const PublicHistory&) override {
        Rng rng(mix_seed(seed_, static_cast<std::uint64_t>(episode)));
        CostFunction c;
        c.values.resize(pairs_);
        for (auto& v : c.values) v = rng.uniform(lo_, hi_);
        return c;
    }

  private:
    int pairs_;
    std::uint64_t seed_;
    double lo_, hi_;
};

class AdaptiveAdversary final : public Adversary {
  public:
    AdaptiveAdversary(int pairs, std::function<CostFunction(int, const PublicHistory&)> cb)
        : pairs_(pairs), cb_(std::move(cb)) {}
    CostFunction cost(int episode, const PublicHistory& history) override {
        CostFunction c = cb_(episode, history);
        if (static_cast<int>(c.values.size()) != pairs_)
            throw InvalidCostError("adversary callback returned a cost of the wrong size");
        for (double v : c.values)
            if (!(v >= 0.0 && v <= 1.0))
                throw InvalidCostError("adversary callback returned a cost outside [0, 1]");
        return c;
    }

  private:
    int pairs_;
    std::function<CostFunction(int, const PublicHistory&)> cb_;
};

class LowerBoundAdversary final : public Adversary {
  public:
    explicit LowerBoundAdversary(LowerBoundInstance inst) : inst_(std::move(inst)) {}
    CostFunction cost(int episode, const PublicHistory&) override {
        // One Bernoulli draw per branch, sampled once per episode and then
        // fixed for the whole episode.
        Rng rng(mix_seed(inst_.seed, static_cast<std::uint64_t>(episode)));
        CostFunction c;
        c.values.assign(inst_.mdp.num_pairs(), 0.0);
        for (int j = 1; j <= inst_.branches; ++j) {
            double p = (j == inst_.good_branch) ? inst_.alpha : inst_.alpha + inst_.epsilon;
            c.values[inst_.branch_exit_pair(j)] = rng.bernoulli(p) ? 1.0 : 0.0;
        }
        c.values[inst_.fast_state_pair()] = 1.0;
        return c;
    }

  private:
    LowerBoundInstance inst_;
};

}  // namespace

std::unique_ptr<Adversary> make_cyclic_adversary(std::vector<CostFunction> costs) {
    return std::make_unique<CyclicAdversary>(std::move(costs));
}

std::unique_ptr<Adversary> make_constant_adversary(CostFunction cost) {
    std::vector<CostFunction> v{std::move(cost)};
    return std::make_unique<CyclicAdversary>(std::move(v));
}

std::unique_ptr<Adversary> make_random_adversary(const SspMdp& mdp, std::uint64_t seed, double lo,
                                                 double hi) {
    return std::make_unique<RandomAdversary>(mdp.num_pairs(), seed, lo, hi);
}

std::unique_ptr<Adversary> make_adaptive_adversary(
    const SspMdp& mdp, std::function<CostFunction(int, const PublicHistory&)> callback) {
    return std::make_unique<AdaptiveAdversary>(mdp.num_pairs(), std::move(callback));
}

int LowerBoundInstance::branch_exit_pair(int j) const { return mdp.pair_index(j, 0); }

int LowerBoundInstance::fast_state_pair() const { return mdp.pair_index(branches + 1, 0); }

StationaryPolicy LowerBoundInstance::branch_policy(int j) const {
    std::vector<int> actions(mdp.num_states(), 0);
    actions[0] = j - 1;  // a_j at s0; exits a_g everywhere else
    return StationaryPolicy::deterministic(mdp, actions);
}

LowerBoundInstance build_lower_bound(double diameter, double tstar, int episodes,
                                     FeedbackMode mode, std::uint64_t seed, int branches) {
    if (branches < 2) throw ParameterViolationError("lower-bound instance needs N >= 2 branches");
    if (diameter < 1.0) throw ParameterViolationError("lower-bound instance needs D >= 1");
    if (!(tstar >= diameter + 1.0))
        throw ParameterViolationError("lower-bound instance needs T* >= D + 1");
    if (!(episodes >= tstar))
        throw ParameterViolationError("lower-bound instance needs K >= T*");
    if (mode == FeedbackMode::kBandit) {
        double states = branches + 2.0;
        if (!(episodes >= states * tstar))
            throw ParameterViolationError("bandit lower-bound instance needs K >= S T*");
    }

    const int N = branches;
    const int fast = N + 1;
    std::vector<std::vector<std::vector<Transition>>> rows(N + 2);
    std::vector<std::string> state_names;
    std::vector<std::vector<std::string>> action_names(N + 2);
    state_names.push_back("s0");
    for (int j = 1; j <= N; ++j) state_names.push_back("s" + std::to_string(j));
    state_names.push_back("f");

    rows[0].resize(N);
    for (int j = 1; j <= N; ++j) {
        rows[0][j - 1] = {{j, 1.0}};
        action_names[0].push_back("a" + std::to_string(j));
    }
    for (int j = 1; j <= N; ++j) {
        rows[j].resize(2);
        rows[j][0] = {{kGoal, 1.0 / tstar}, {j, 1.0 - 1.0 / tstar}};  // a_g
        rows[j][1] = {{fast, 1.0}};                                   // a_f
        action_names[j] = {"ag", "af"};
    }
    rows[fast].resize(1);
    rows[fast][0] = {{kGoal, 1.0 / diameter}, {fast, 1.0 - 1.0 / diameter}};
    action_names[fast] = {"ag"};

    LowerBoundInstance inst{SspMdp(0, std::move(rows), std::move(state_names),
                                   std::move(action_names)),
                            N,
                            diameter,
                            tstar,
                            diameter / (2.0 * tstar),
                            0.0,
                            0,
                            mode,
                            seed};
    double scale = (mode == FeedbackMode::kBandit) ? static_cast<double>(N) : 1.0;
    inst.epsilon = 0.25 * std::sqrt(scale * inst.alpha * (1.0 - inst.alpha) /
                                    (2.0 * static_cast<double>(episodes)));
    if (inst.epsilon > inst.alpha)
        throw ParameterViolationError("lower-bound gap exceeds the base cost level");
    Rng rng(mix_seed(seed, 0xA11CEull));
    inst.good_branch = 1 + static_cast<int>(rng.uniform() * N);
    if (inst.good_branch > N) inst.good_branch = N;
    return inst;
}

std::unique_ptr<Adversary> make_lower_bound_adversary(const LowerBoundInstance& instance) {
    return std::make_unique<LowerBoundAdversary>(instance);
}

}  // namespace ssplab
