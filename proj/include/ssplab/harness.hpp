#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ssplab/adversaries.hpp"
#include "ssplab/learners.hpp"

namespace ssplab {

/// Builds a fresh adversary for one trial from the trial's derived seed.
/// Oblivious adversaries may ignore the seed.
using AdversaryFactory = std::function<std::unique_ptr<Adversary>(std::uint64_t seed)>;

struct ExperimentConfig {
    LearnerConfig learner;
    int trials = 1;
    std::uint64_t seed = 0;
    int jobs = 1;
    /// When > 0, every OMD step is audited against this many fixed random
    /// feasible points (optimality margins land in the diagnostics).
    int audit_points = 0;
    std::uint64_t audit_seed = 0x5eedfeedULL;
};

struct TrialResult {
    int trial = 0;
    bool failed = false;
    std::string error;
    std::vector<double> cum_learner;     // per episode
    std::vector<double> cum_comparator;  // per episode, hindsight-best policy
    double regret = 0.0;
    int truncated_episodes = 0;
    LearnerRunDiagnostics diagnostics;
};

struct RegretReport {
    int episodes = 0;
    std::vector<TrialResult> trials;
    double mean_regret = 0.0;
    double std_regret = 0.0;
};

/// Runs (learner x adversary x MDP) for K episodes over seeded trials:
/// per episode the adversary emits c_k, the learner's plan is simulated,
/// feedback is filtered by mode, and the learner updates; afterwards the
/// comparator is the best fixed deterministic proper policy against the
/// realized cost sequence. Trials run in parallel (config.jobs) with
/// per-trial substreams; failures are recorded without aborting the rest.
RegretReport run_experiment(const SspMdp& mdp, const ExperimentConfig& config,
                            const AdversaryFactory& adversary);

std::string report_to_csv(const RegretReport& report);
std::string report_to_json(const ExperimentConfig& config, const RegretReport& report);

struct SweepCell {
    std::string algorithm;
    int episodes = 0;
    RegretReport report;
};

struct SweepResult {
    std::vector<SweepCell> cells;
    std::map<std::string, double> slopes;  // per algorithm: d log(mean R_K) / d log K
};

/// Cartesian product over algorithms and episode counts, deterministic
/// ordering, with a least-squares log-log slope fit per algorithm.
SweepResult sweep(const SspMdp& mdp, const ExperimentConfig& base,
                  const std::vector<std::string>& algorithms, const std::vector<int>& episode_grid,
                  const AdversaryFactory& adversary);

std::string sweep_to_json(const SweepResult& result);

/// Least-squares slope of log(y) against log(x); pairs with y <= 0 are
/// dropped.
double fit_log_slope(const std::vector<std::pair<double, double>>& points);

/// Small three-state benchmark instance with two actions per state,
/// stochastic exits, and every hitting time below 3 steps in expectation;
/// the default subject of the validation suite and scaling experiments.
SspMdp toy3_mdp();

/// Two complementary cost functions for toy3 whose alternation gives a
/// nondegenerate hindsight-best policy.
std::vector<CostFunction> toy3_alternating_costs();

struct PropertyCheck {
    std::string name;
    bool pass = false;
    double margin = 0.0;  // how far inside the bound (negative = violated)
    std::string detail;
};

/// Monte-Carlo validation ledger: occupancy identities, visit-count
/// means, the variance bounds, estimator unbiasedness, and the
/// hitting-time tail, all at the given sample count on a small MDP.
std::vector<PropertyCheck> property_suite(const SspMdp& mdp, int samples, std::uint64_t seed);

std::string property_ledger_to_json(const std::vector<PropertyCheck>& ledger);

}  // namespace ssplab
