#pragma once

#include <Eigen/Dense>

#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ssplab/adversaries.hpp"
#include "ssplab/occupancy.hpp"
#include "ssplab/omd.hpp"

namespace ssplab {

/// User-facing learner configuration. Derived parameters are computed by
/// derive_parameters below.
struct LearnerConfig {
    std::string algorithm;       // oreps | adaptive | skewed | bandit | bandit-hp
    int episodes = 0;            // K
    double hitting_bound = 0.0;  // T; required by all algorithms except adaptive
    int h1 = 0;                  // layered horizon; 0 -> ceil(K^{1/3})
    double delta = 0.1;          // confidence level
    std::uint64_t seed = 0;      // learner-internal randomness (expert sampling)
    /// Keep the paper-exact asymptotic constants for the high-probability
    /// bandit bias coefficient. Off by default: at practical episode
    /// counts the asymptotic gamma violates gamma * H <= 1, which both
    /// breaks the nonnegativity of the fed loss and degenerates the
    /// update, so the default caps gamma at 1/(2H).
    bool paper_gamma = false;
};

/// All parameters derived from the paper's formulas (SA denotes the
/// number of state-action pairs, D the diameter computed from the MDP).
struct DerivedParams {
    double sa = 0.0;        // |Gamma|
    double diameter = 0.0;  // D
    double t_fast = 0.0;    // T^{pi^f}(s0)
    double eta = 0.0;
    double lambda = 0.0;
    int h1 = 0;
    int h2 = 0;
    double beta = 0.0;           // bandit-hp rate multiplier
    double conc_factor = 0.0;    // bandit-hp C
    double gamma = 0.0;          // paper value
    double gamma_effective = 0.0;  // capped at 1/(2H) unless paper_gamma
    double floor = 0.0;          // 1/(T K^4)
    double rho1 = 0.0;           // 2T
};

DerivedParams derive_parameters(const SspMdp& mdp, const LearnerConfig& config);

/// What the learner wants executed this episode.
struct SigmaPlan {
    const LoopFreeMdp* loop_free = nullptr;
    LayeredPolicy policy;
    StationaryPolicy fast;
};

struct ExecutionPlan {
    std::optional<StationaryPolicy> stationary;
    std::optional<SigmaPlan> sigma;
};

/// End-of-episode feedback. In bandit mode only the visited pairs carry
/// cost values; the full cost function is never exposed to the learner.
struct Feedback {
    FeedbackMode mode = FeedbackMode::kFull;
    CostFunction full_cost;              // full-information mode only
    std::vector<double> observed_cost;   // per gamma index, bandit mode
    std::vector<char> observed;          // visited mask, bandit mode
    const SigmaTrace* sigma_trace = nullptr;  // layered bookkeeping
};

/// Aggregated per-run solver and invariants bookkeeping.
struct LearnerRunDiagnostics {
    int steps = 0;
    long total_solver_iterations = 0;
    double max_kkt = 0.0;
    double max_feasibility = 0.0;  // emitted-occupancy membership residual
    double min_fed_loss = std::numeric_limits<double>::infinity();  // bandit-hp
    double worst_audit_margin = std::numeric_limits<double>::infinity();
    int audited_steps = 0;
    int max_rate_increases = 0;  // bandit-hp, max over pairs
};

class Learner {
  public:
    virtual ~Learner() = default;
    virtual FeedbackMode feedback_mode() const = 0;
    /// Policy for episode k (1-based). Must be called exactly once per
    /// episode, before observe().
    virtual ExecutionPlan plan(int episode) = 0;
    virtual void observe(const Feedback& feedback) = 0;
    const LearnerRunDiagnostics& run_diagnostics() const { return diag_; }

    /// Samples `count` feasible points once (seeded) and checks every
    /// subsequent OMD step's output against them on the step objective;
    /// margins land in run_diagnostics().
    virtual void enable_step_audit(int count, std::uint64_t seed) = 0;

  protected:
    LearnerRunDiagnostics diag_;
};

std::unique_ptr<Learner> make_learner(const SspMdp& mdp, const LearnerConfig& config);

/// Degenerate learner that plays a fixed stationary policy (useful as a
/// comparator oracle in experiments).
std::unique_ptr<Learner> make_fixed_policy_learner(const SspMdp& mdp, StationaryPolicy policy);

/// Importance-weighted cost estimate over the condensed pairs of `lf`:
/// chat(s,a) = N~(s,a) c(s,a) / q(s,a) with N~ summed over layers and
/// q(s,a) the plain layer aggregate of the executed occupancy. Unvisited
/// pairs estimate 0; a visited pair with zero occupancy raises
/// DivisionHazardError.
Eigen::VectorXd bandit_estimator(const LoopFreeMdp& lf, const SigmaTrace& trace,
                                 const std::vector<double>& observed_cost,
                                 const std::vector<char>& observed,
                                 const Eigen::VectorXd& q_plain);

/// bhat(s,a) = (sum_h h q(s,a,h)) chat(s,a) / q(s,a).
Eigen::VectorXd bias_vector(const Eigen::VectorXd& chat, const Eigen::VectorXd& q_hsum,
                            const Eigen::VectorXd& q_plain);

/// Strictly feasible interior point of the layered polytope (uniform
/// layered occupancy blended toward the lifted fast policy to respect the
/// mass bound). Floors are validated; an interior point that cannot clear
/// them raises InfeasibleFloorError.
Eigen::VectorXd strict_interior_point(const LoopFreeMdp& lf, const StationaryPolicy& fast,
                                      double T, double floor);

/// Random feasible points for optimality audits.
OccupancyMeasure random_flat_feasible(const SspMdp& mdp, double T, const OccupancyMeasure& anchor,
                                      Rng& rng);
Eigen::VectorXd random_layered_feasible(const LoopFreeMdp& lf, double T, double floor,
                                        const Eigen::VectorXd& anchor,
                                        const Eigen::VectorXd& center, Rng& rng);

}  // namespace ssplab
