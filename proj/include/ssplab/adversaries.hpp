#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ssplab/mdp.hpp"

namespace ssplab {

enum class FeedbackMode { kFull, kBandit };

/// Public history an adaptive adversary may condition on: past traces and,
/// in full-information mode, the previously revealed cost functions. The
/// learner's internal state and current-episode randomness stay hidden.
struct PublicHistory {
    std::vector<EpisodeTrace> traces;
    std::vector<CostFunction> revealed_costs;  // full info only
};

/// Per-episode cost generator. Deterministic given (seed, episode index).
class Adversary {
  public:
    virtual ~Adversary() = default;
    /// Cost function for episode k (1-based).
    virtual CostFunction cost(int episode, const PublicHistory& history) = 0;
};

/// Oblivious adversary cycling through a fixed list of cost functions.
std::unique_ptr<Adversary> make_cyclic_adversary(std::vector<CostFunction> costs);
std::unique_ptr<Adversary> make_constant_adversary(CostFunction cost);

/// Seeded i.i.d. uniform-[lo, hi] costs, bit-reproducible across runs.
std::unique_ptr<Adversary> make_random_adversary(const SspMdp& mdp, std::uint64_t seed,
                                                 double lo = 0.0, double hi = 1.0);

/// Wraps a user callback; returned costs are validated into [0, 1]
/// (InvalidCostError otherwise).
std::unique_ptr<Adversary> make_adaptive_adversary(
    const SspMdp& mdp, std::function<CostFunction(int, const PublicHistory&)> callback);

/// Stochastic lower-bound environment: N branch states with one slightly
/// cheaper hidden branch, plus a separate fast state. Costs on the branch
/// exits are Bernoulli draws sampled once per episode and fixed within it.
struct LowerBoundInstance {
    SspMdp mdp;
    int branches = 0;      // N
    double diameter_in = 0.0;   // D parameter of the construction
    double tstar_in = 0.0;      // T* parameter
    double alpha = 0.0;         // D / (2 T*)
    double epsilon = 0.0;       // optimality gap
    int good_branch = 0;        // j*, sampled uniformly from the seed
    FeedbackMode mode = FeedbackMode::kFull;
    std::uint64_t seed = 0;

    /// Branch-exit pair indices (s_j, a_g) and the fast-state pair.
    int branch_exit_pair(int j) const;
    int fast_state_pair() const;
    /// The policy that commits to branch j and exits through it.
    StationaryPolicy branch_policy(int j) const;
};

/// Builds the instance for parameters (D, T*, K); preconditions
/// K >= T* >= D+1 (full information) and K >= S T* with S = N+2 (bandit)
/// are enforced with ParameterViolationError. epsilon is
/// (1/4) sqrt(alpha (1-alpha) / (2K)) in full-information mode and
/// (1/4) sqrt(N alpha (1-alpha) / (2K)) in bandit mode.
LowerBoundInstance build_lower_bound(double diameter, double tstar, int episodes,
                                     FeedbackMode mode, std::uint64_t seed, int branches = 2);

/// The per-episode stochastic cost law of an instance.
std::unique_ptr<Adversary> make_lower_bound_adversary(const LowerBoundInstance& instance);

}  // namespace ssplab
