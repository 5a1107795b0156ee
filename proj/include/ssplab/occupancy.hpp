#pragma once

#include <Eigen/Sparse>

#include <vector>

#include "ssplab/mdp.hpp"

namespace ssplab {

/// Expected visit counts over Gamma induced by a proper policy.
struct OccupancyMeasure {
    std::vector<double> values;

    double total_mass() const {
        double t = 0.0;
        for (double v : values) t += v;
        return t;
    }
};

/// q_pi(s, a): solves the flow linear system by dense LU. Throws
/// ImproperPolicyError when the policy is not proper.
OccupancyMeasure occupancy_of_policy(const SspMdp& mdp, const StationaryPolicy& policy);

/// pi_q(a|s) proportional to q(s, a); rows with (numerically) zero mass
/// become uniform over the available actions.
StationaryPolicy policy_of_occupancy(const SspMdp& mdp, const OccupancyMeasure& q);

/// Flow-polytope description shared by the flat space and the
/// loop-free/skewed spaces: {q >= 0 : E q = e, mass_coef . q <= mass_bound},
/// with per-coordinate positive weights used by weighted-entropy solvers.
struct FlowPolytope {
    Eigen::SparseMatrix<double> flow;  // E, rows = flow equalities
    Eigen::VectorXd rhs;               // e
    Eigen::VectorXd weight;            // w_i > 0
    Eigen::VectorXd mass_coef;         // m_i >= 0
    double mass_bound = 0.0;           // T
};

/// Per-constraint-family residuals of a candidate point.
struct MembershipReport {
    double flow_residual = 0.0;    // max |E q - e|
    double mass_excess = 0.0;      // max(0, m.q - T)
    double negativity = 0.0;       // max(0, -min_i q_i)
    double floor_violation = 0.0;  // max(0, floor - min aggregate), when floors apply

    double max_violation() const {
        double m = flow_residual;
        if (mass_excess > m) m = mass_excess;
        if (negativity > m) m = negativity;
        if (floor_violation > m) m = floor_violation;
        return m;
    }
};

/// Delta(T) for the original MDP; weights are all 1.
FlowPolytope flat_polytope(const SspMdp& mdp, double T);

MembershipReport check_membership(const FlowPolytope& poly, const Eigen::VectorXd& q);
MembershipReport check_flat_membership(const SspMdp& mdp, const OccupancyMeasure& q, double T);

/// Non-stationary policy over the layered state set: one action
/// distribution per reachable (state, layer) with layer <= H1.
struct LayeredPolicy {
    // probs[h-1][slot][a] where slot indexes LoopFreeMdp::states_at(h).
    std::vector<std::vector<std::vector<double>>> probs;
};

/// Loop-free reduction of an SSP instance: states duplicated over H1
/// layers, then funneled through a fast state for H2 further layers, with
/// unit cost at the fast state. Layered states unreachable from the
/// initial layer are removed, and the per-layer copies of the fast state
/// (whose occupancies are all equal by the flow constraints) are collapsed
/// into a single variable.
class LoopFreeMdp {
  public:
    LoopFreeMdp(const SspMdp& base, int h1, int h2);

    const SspMdp& base() const { return *base_; }
    int h1() const { return h1_; }
    int h2() const { return h2_; }
    int horizon() const { return h1_ + h2_; }

    /// Reachable states of layer h (1-based, h <= H1).
    const std::vector<int>& states_at(int h) const { return layers_[h - 1]; }
    bool is_reachable(int s, int h) const { return slot_of(s, h) >= 0; }
    int slot_of(int s, int h) const { return slots_[h - 1][s]; }

    /// Collapsed decision variables: one per reachable (s, a, h <= H1)
    /// plus the single fast-state variable (index num_vars()-1).
    int num_vars() const { return nv_; }
    int fast_var() const { return nv_ - 1; }
    int var_index(int s, int a, int h) const;
    int var_layer(int v) const { return var_layer_[v]; }

    /// Condensed state-action pairs present in the reduction: reachable
    /// original pairs followed by the fast pair.
    int num_pairs() const { return static_cast<int>(pair_base_.size()) + 1; }
    int fast_pair() const { return num_pairs() - 1; }
    int pair_id(int s, int a) const;
    int pair_of_var(int v) const { return var_pair_[v]; }
    /// Gamma index in the base MDP of a condensed pair (-1 for the fast pair).
    int base_pair(int pid) const {
        return pid == fast_pair() ? -1 : pair_base_[pid];
    }

    double fast_layer_weight_sum(double lambda) const;  // sum_{h>H1} (1 + lambda h)
    double fast_layer_hsum() const;                     // sum_{h>H1} h

    /// Layered polytope Delta~(T), skew-weighted when lambda > 0.
    FlowPolytope polytope(double T, double lambda) const;

    /// Aggregation over layers, z(s,a) = sum_h (1 + lambda h) q(s,a,h),
    /// as a num_pairs() x num_vars() sparse map.
    Eigen::SparseMatrix<double> aggregate(double lambda) const;
    /// sum_h h q(s,a,h) per pair.
    Eigen::SparseMatrix<double> aggregate_hsum() const;

    /// Exact occupancy of a layered policy by forward recursion.
    std::vector<double> occupancy_of(const LayeredPolicy& policy) const;
    LayeredPolicy policy_of(const std::vector<double>& q) const;
    /// Layer-replicated copy of a stationary policy.
    LayeredPolicy lift(const StationaryPolicy& policy) const;

    /// Per-variable cost under the lifted cost function (fast variable: 1).
    std::vector<double> lift_cost(const CostFunction& cost) const;
    double mass(const std::vector<double>& q) const;
    /// <q, c~> over the layered space.
    double inner_cost(const std::vector<double>& q, const CostFunction& cost) const;
    /// <q, h o c~>: layer-weighted cost inner product.
    double inner_hcost(const std::vector<double>& q, const CostFunction& cost) const;

  private:
    const SspMdp* base_;
    int h1_, h2_;
    std::vector<std::vector<int>> layers_;    // reachable states per layer
    std::vector<std::vector<int>> slots_;     // state -> slot or -1, per layer
    std::vector<std::vector<int>> var_base_;  // per (layer, slot) variable offsets
    std::vector<int> var_pair_;
    std::vector<int> var_layer_;
    std::vector<int> pair_base_;            // condensed pair -> base gamma index
    std::vector<int> pair_of_gamma_;        // base gamma index -> condensed pair or -1
    int nv_ = 0;
};

/// Membership for the layered space (optionally with per-pair floors on
/// the plain aggregates, as used by the floored bandit decision set).
MembershipReport check_layered_membership(const LoopFreeMdp& lf, const std::vector<double>& q,
                                          double T, double lambda, double floor = 0.0);

/// A layered occupancy together with its skew weight; the skewed view is
/// q~(s,a,h) = (1 + lambda h) q(s,a,h).
struct SkewedPoint {
    std::vector<double> q;  // collapsed, unskewed
    double lambda = 0.0;

    double value_at(const LoopFreeMdp& lf, int s, int a, int h) const;
    double skewed_at(const LoopFreeMdp& lf, int s, int a, int h) const;
};

SkewedPoint skew_map(std::vector<double> q, double lambda);

/// Expanded per-(s,a,h) views; the fast variable is replicated over its
/// layers. Index layout: collapsed vars first, then fast layers H1+1..H.
std::vector<double> expand_layered(const LoopFreeMdp& lf, const std::vector<double>& q);
std::vector<double> skew_values(const LoopFreeMdp& lf, const std::vector<double>& q, double lambda);
/// Exact inverse of skew_values on expanded vectors.
std::vector<double> unskew_values(const LoopFreeMdp& lf, const std::vector<double>& skewed,
                                  double lambda);

/// Execution trace of sigma(pi~): the flat trace in the original MDP plus
/// the layered bookkeeping counts N~ (0/1 per (s,a,h), h <= H1, and the
/// fast pseudo-visits for all h > H1 when the episode is still running at
/// layer H1).
struct SigmaTrace {
    EpisodeTrace flat;
    std::vector<int> layered_vars;  // visited collapsed var per step h=1..min(I,H1)
    bool alive_after_h1 = false;    // took at least H1 steps
    double loop_free_cost = 0.0;    // <N~, c~>
};

/// Runs sigma(pi~): follow the layered policy for the first H1 steps, then
/// the fast policy until the goal.
SigmaTrace simulate_sigma_episode(const LoopFreeMdp& lf, const LayeredPolicy& policy,
                                  const StationaryPolicy& fast, const CostFunction& cost,
                                  Rng& rng);

}  // namespace ssplab
