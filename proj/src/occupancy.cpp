#include "ssplab/occupancy.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace ssplab {

namespace {

constexpr double kResidualTol = 1e-6;
constexpr double kZeroRow = 1e-300;

}  // namespace

OccupancyMeasure occupancy_of_policy(const SspMdp& mdp, const StationaryPolicy& policy) {
    policy.validate(mdp);
    const int S = mdp.num_states();
    // State visit counts x solve (I - P_pi^T) x = e_{s0}.
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(S, S);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < mdp.num_actions(s); ++a) {
            const double w = policy.probs[s][a];
            if (w == 0.0) continue;
            for (const auto& tr : mdp.row(s, a))
                if (tr.next != kGoal) A(tr.next, s) -= w * tr.prob;
        }
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(S);
    rhs(mdp.initial_state()) = 1.0;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
    Eigen::VectorXd x = lu.solve(rhs);
    if (!x.allFinite() || (A * x - rhs).cwiseAbs().maxCoeff() > kResidualTol ||
        x.minCoeff() < -kResidualTol)
        throw ImproperPolicyError("occupancy flow system has no proper solution");
    OccupancyMeasure q;
    q.values.assign(mdp.num_pairs(), 0.0);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < mdp.num_actions(s); ++a)
            q.values[mdp.pair_index(s, a)] = std::max(x(s), 0.0) * policy.probs[s][a];
    return q;
}

StationaryPolicy policy_of_occupancy(const SspMdp& mdp, const OccupancyMeasure& q) {
    StationaryPolicy p;
    p.probs.resize(mdp.num_states());
    for (int s = 0; s < mdp.num_states(); ++s) {
        const int na = mdp.num_actions(s);
        p.probs[s].assign(na, 0.0);
        double total = 0.0;
        for (int a = 0; a < na; ++a) total += q.values[mdp.pair_index(s, a)];
        if (total < kZeroRow) {
            for (int a = 0; a < na; ++a) p.probs[s][a] = 1.0 / na;
        } else {
            for (int a = 0; a < na; ++a) p.probs[s][a] = q.values[mdp.pair_index(s, a)] / total;
        }
    }
    return p;
}

FlowPolytope flat_polytope(const SspMdp& mdp, double T) {
    const int S = mdp.num_states();
    const int n = mdp.num_pairs();
    std::vector<Eigen::Triplet<double>> trip;
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < mdp.num_actions(s); ++a) {
            const int col = mdp.pair_index(s, a);
            trip.emplace_back(s, col, 1.0);
            for (const auto& tr : mdp.row(s, a))
                if (tr.next != kGoal && tr.prob != 0.0) trip.emplace_back(tr.next, col, -tr.prob);
        }
    FlowPolytope poly;
    poly.flow.resize(S, n);
    poly.flow.setFromTriplets(trip.begin(), trip.end());
    poly.rhs = Eigen::VectorXd::Zero(S);
    poly.rhs(mdp.initial_state()) = 1.0;
    poly.weight = Eigen::VectorXd::Ones(n);
    poly.mass_coef = Eigen::VectorXd::Ones(n);
    poly.mass_bound = T;
    return poly;
}

MembershipReport check_membership(const FlowPolytope& poly, const Eigen::VectorXd& q) {
    MembershipReport rep;
    rep.flow_residual = (poly.flow * q - poly.rhs).cwiseAbs().maxCoeff();
    rep.mass_excess = std::max(0.0, poly.mass_coef.dot(q) - poly.mass_bound);
    rep.negativity = std::max(0.0, -q.minCoeff());
    return rep;
}

MembershipReport check_flat_membership(const SspMdp& mdp, const OccupancyMeasure& q, double T) {
    FlowPolytope poly = flat_polytope(mdp, T);
    Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(q.values.data(), q.values.size());
    return check_membership(poly, v);
}

LoopFreeMdp::LoopFreeMdp(const SspMdp& base, int h1, int h2) : base_(&base), h1_(h1), h2_(h2) {
    if (h1 < 1 || h2 < 1) throw ParameterViolationError("loop-free horizons must be >= 1");
    const int S = base.num_states();
    layers_.resize(h1);
    slots_.assign(h1, std::vector<int>(S, -1));
    // Breadth-first reachability over the layered graph.
    std::vector<char> cur(S, 0), nxt(S, 0);
    cur[base.initial_state()] = 1;
    for (int h = 1; h <= h1; ++h) {
        for (int s = 0; s < S; ++s)
            if (cur[s]) {
                slots_[h - 1][s] = static_cast<int>(layers_[h - 1].size());
                layers_[h - 1].push_back(s);
            }
        if (h == h1) break;
        std::fill(nxt.begin(), nxt.end(), 0);
        for (int s : layers_[h - 1])
            for (int a = 0; a < base.num_actions(s); ++a)
                for (const auto& tr : base.row(s, a))
                    if (tr.next != kGoal && tr.prob > 0.0) nxt[tr.next] = 1;
        cur.swap(nxt);
    }
    // Collapsed variable table and condensed pair ids.
    pair_of_gamma_.assign(base.num_pairs(), -1);
    var_base_.resize(h1);
    int nv = 0;
    for (int h = 1; h <= h1; ++h) {
        var_base_[h - 1].resize(layers_[h - 1].size());
        for (std::size_t slot = 0; slot < layers_[h - 1].size(); ++slot) {
            var_base_[h - 1][slot] = nv;
            nv += base.num_actions(layers_[h - 1][slot]);
        }
    }
    nv_ = nv + 1;  // + collapsed fast variable
    var_pair_.assign(nv_, -1);
    var_layer_.assign(nv_, 0);
    for (int h = 1; h <= h1; ++h) {
        int v = var_base_[h - 1];
        for (int s : layers_[h - 1])
            for (int a = 0; a < base.num_actions(s); ++a, ++v) {
                int g = base.pair_index(s, a);
                if (pair_of_gamma_[g] < 0) {
                    pair_of_gamma_[g] = static_cast<int>(pair_base_.size());
                    pair_base_.push_back(g);
                }
                var_pair_[v] = pair_of_gamma_[g];
                var_layer_[v] = h;
            }
    }
    var_pair_[fast_var()] = fast_pair();
    var_layer_[fast_var()] = h1 + 1;
}

int LoopFreeMdp::var_index(int s, int a, int h) const {
    if (h < 1 || h > h1_) return -1;
    int slot = slots_[h - 1][s];
    if (slot < 0) return -1;
    return var_base_[h - 1][slot] + a;
}

int LoopFreeMdp::pair_id(int s, int a) const { return pair_of_gamma_[base_->pair_index(s, a)]; }

double LoopFreeMdp::fast_layer_weight_sum(double lambda) const {
    double w = 0.0;
    for (int h = h1_ + 1; h <= horizon(); ++h) w += 1.0 + lambda * h;
    return w;
}

double LoopFreeMdp::fast_layer_hsum() const {
    double s = 0.0;
    for (int h = h1_ + 1; h <= horizon(); ++h) s += h;
    return s;
}

FlowPolytope LoopFreeMdp::polytope(double T, double lambda) const {
    // Rows: (s0, 1) normalization; flow at each reachable (s, h), 2<=h<=H1;
    // the collapsed fast-state definition F = sum of layer-H1 mass.
    std::vector<Eigen::Triplet<double>> trip;
    int rows = 0;
    std::vector<std::vector<int>> row_of(h1_, std::vector<int>(base_->num_states(), -1));
    for (int h = 1; h <= h1_; ++h)
        for (int s : layers_[h - 1]) row_of[h - 1][s] = rows++;
    const int fast_row = rows++;

    for (int h = 1; h <= h1_; ++h)
        for (int s : layers_[h - 1])
            for (int a = 0; a < base_->num_actions(s); ++a) {
                const int col = var_index(s, a, h);
                trip.emplace_back(row_of[h - 1][s], col, 1.0);
                if (h < h1_) {
                    for (const auto& tr : base_->row(s, a))
                        if (tr.next != kGoal && tr.prob != 0.0)
                            trip.emplace_back(row_of[h][tr.next], col, -tr.prob);
                } else {
                    trip.emplace_back(fast_row, col, -1.0);
                }
            }
    trip.emplace_back(fast_row, fast_var(), 1.0);

    FlowPolytope poly;
    poly.flow.resize(rows, nv_);
    poly.flow.setFromTriplets(trip.begin(), trip.end());
    poly.rhs = Eigen::VectorXd::Zero(rows);
    poly.rhs(row_of[0][base_->initial_state()]) = 1.0;
    poly.weight = Eigen::VectorXd::Ones(nv_);
    for (int v = 0; v < nv_ - 1; ++v) poly.weight(v) = 1.0 + lambda * var_layer_[v];
    poly.weight(fast_var()) = fast_layer_weight_sum(lambda);
    poly.mass_coef = Eigen::VectorXd::Ones(nv_);
    poly.mass_coef(fast_var()) = static_cast<double>(h2_);
    poly.mass_bound = T;
    return poly;
}

Eigen::SparseMatrix<double> LoopFreeMdp::aggregate(double lambda) const {
    std::vector<Eigen::Triplet<double>> trip;
    for (int v = 0; v < nv_ - 1; ++v)
        trip.emplace_back(var_pair_[v], v, 1.0 + lambda * var_layer_[v]);
    trip.emplace_back(fast_pair(), fast_var(), fast_layer_weight_sum(lambda));
    Eigen::SparseMatrix<double> A(num_pairs(), nv_);
    A.setFromTriplets(trip.begin(), trip.end());
    return A;
}

Eigen::SparseMatrix<double> LoopFreeMdp::aggregate_hsum() const {
    std::vector<Eigen::Triplet<double>> trip;
    for (int v = 0; v < nv_ - 1; ++v)
        trip.emplace_back(var_pair_[v], v, static_cast<double>(var_layer_[v]));
    trip.emplace_back(fast_pair(), fast_var(), fast_layer_hsum());
    Eigen::SparseMatrix<double> A(num_pairs(), nv_);
    A.setFromTriplets(trip.begin(), trip.end());
    return A;
}

std::vector<double> LoopFreeMdp::occupancy_of(const LayeredPolicy& policy) const {
    const int S = base_->num_states();
    std::vector<double> q(nv_, 0.0);
    std::vector<double> mu(S, 0.0), nxt(S, 0.0);
    mu[base_->initial_state()] = 1.0;
    for (int h = 1; h <= h1_; ++h) {
        std::fill(nxt.begin(), nxt.end(), 0.0);
        for (int s : layers_[h - 1]) {
            const int slot = slots_[h - 1][s];
            for (int a = 0; a < base_->num_actions(s); ++a) {
                const double qa = mu[s] * policy.probs[h - 1][slot][a];
                q[var_index(s, a, h)] = qa;
                if (h < h1_ && qa > 0.0)
                    for (const auto& tr : base_->row(s, a))
                        if (tr.next != kGoal) nxt[tr.next] += qa * tr.prob;
            }
        }
        mu.swap(nxt);
    }
    double fast_mass = 0.0;
    for (int s : layers_[h1_ - 1])
        for (int a = 0; a < base_->num_actions(s); ++a) fast_mass += q[var_index(s, a, h1_)];
    q[fast_var()] = fast_mass;
    return q;
}

LayeredPolicy LoopFreeMdp::policy_of(const std::vector<double>& q) const {
    LayeredPolicy pol;
    pol.probs.resize(h1_);
    for (int h = 1; h <= h1_; ++h) {
        pol.probs[h - 1].resize(layers_[h - 1].size());
        for (int s : layers_[h - 1]) {
            const int slot = slots_[h - 1][s];
            const int na = base_->num_actions(s);
            auto& row = pol.probs[h - 1][slot];
            row.assign(na, 0.0);
            double total = 0.0;
            for (int a = 0; a < na; ++a) total += q[var_index(s, a, h)];
            if (total < kZeroRow) {
                for (int a = 0; a < na; ++a) row[a] = 1.0 / na;
            } else {
                for (int a = 0; a < na; ++a) row[a] = q[var_index(s, a, h)] / total;
            }
        }
    }
    return pol;
}

LayeredPolicy LoopFreeMdp::lift(const StationaryPolicy& policy) const {
    LayeredPolicy pol;
    pol.probs.resize(h1_);
    for (int h = 1; h <= h1_; ++h) {
        pol.probs[h - 1].resize(layers_[h - 1].size());
        for (int s : layers_[h - 1]) pol.probs[h - 1][slots_[h - 1][s]] = policy.probs[s];
    }
    return pol;
}

std::vector<double> LoopFreeMdp::lift_cost(const CostFunction& cost) const {
    std::vector<double> c(nv_, 0.0);
    for (int v = 0; v < nv_ - 1; ++v) c[v] = cost.values[pair_base_[var_pair_[v]]];
    c[fast_var()] = 1.0;
    return c;
}

double LoopFreeMdp::mass(const std::vector<double>& q) const {
    double m = 0.0;
    for (int v = 0; v < nv_ - 1; ++v) m += q[v];
    return m + h2_ * q[fast_var()];
}

double LoopFreeMdp::inner_cost(const std::vector<double>& q, const CostFunction& cost) const {
    double total = 0.0;
    for (int v = 0; v < nv_ - 1; ++v) total += q[v] * cost.values[pair_base_[var_pair_[v]]];
    return total + q[fast_var()] * h2_;  // fast layers all cost 1
}

double LoopFreeMdp::inner_hcost(const std::vector<double>& q, const CostFunction& cost) const {
    double total = 0.0;
    for (int v = 0; v < nv_ - 1; ++v)
        total += var_layer_[v] * q[v] * cost.values[pair_base_[var_pair_[v]]];
    return total + q[fast_var()] * fast_layer_hsum();
}

MembershipReport check_layered_membership(const LoopFreeMdp& lf, const std::vector<double>& q,
                                          double T, double lambda, double floor) {
    FlowPolytope poly = lf.polytope(T, lambda);
    Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(q.data(), q.size());
    MembershipReport rep = check_membership(poly, v);
    if (floor > 0.0) {
        Eigen::VectorXd agg = lf.aggregate(0.0) * v;
        rep.floor_violation = std::max(0.0, floor - agg.minCoeff());
    }
    return rep;
}

double SkewedPoint::value_at(const LoopFreeMdp& lf, int s, int a, int h) const {
    if (h > lf.h1()) return q[lf.fast_var()];
    int v = lf.var_index(s, a, h);
    return v < 0 ? 0.0 : q[v];
}

double SkewedPoint::skewed_at(const LoopFreeMdp& lf, int s, int a, int h) const {
    return (1.0 + lambda * h) * value_at(lf, s, a, h);
}

SkewedPoint skew_map(std::vector<double> q, double lambda) {
    return SkewedPoint{std::move(q), lambda};
}

std::vector<double> expand_layered(const LoopFreeMdp& lf, const std::vector<double>& q) {
    std::vector<double> out(q.begin(), q.end() - 1);
    out.insert(out.end(), lf.h2(), q[lf.fast_var()]);
    return out;
}

std::vector<double> skew_values(const LoopFreeMdp& lf, const std::vector<double>& q,
                                double lambda) {
    std::vector<double> out = expand_layered(lf, q);
    const int nv = lf.num_vars();
    for (int v = 0; v < nv - 1; ++v) out[v] *= 1.0 + lambda * lf.var_layer(v);
    for (int i = 0; i < lf.h2(); ++i) out[nv - 1 + i] *= 1.0 + lambda * (lf.h1() + 1 + i);
    return out;
}

std::vector<double> unskew_values(const LoopFreeMdp& lf, const std::vector<double>& skewed,
                                  double lambda) {
    const int nv = lf.num_vars();
    std::vector<double> q(nv, 0.0);
    for (int v = 0; v < nv - 1; ++v) q[v] = skewed[v] / (1.0 + lambda * lf.var_layer(v));
    q[lf.fast_var()] = skewed[nv - 1] / (1.0 + lambda * (lf.h1() + 1));
    return q;
}

SigmaTrace simulate_sigma_episode(const LoopFreeMdp& lf, const LayeredPolicy& policy,
                                  const StationaryPolicy& fast, const CostFunction& cost,
                                  Rng& rng) {
    const SspMdp& mdp = lf.base();
    SigmaTrace trace;
    trace.flat.visits.assign(mdp.num_pairs(), 0);
    int state = mdp.initial_state();
    for (std::int64_t step = 1; step <= kEpisodeStepCap; ++step) {
        int action;
        if (step <= lf.h1()) {
            const int slot = lf.slot_of(state, static_cast<int>(step));
            action = rng.discrete(policy.probs[step - 1][slot]);
            trace.layered_vars.push_back(lf.var_index(state, action, static_cast<int>(step)));
        } else {
            action = rng.discrete(fast.probs[state]);
        }
        const int idx = mdp.pair_index(state, action);
        ++trace.flat.visits[idx];
        ++trace.flat.steps;
        trace.flat.incurred_cost += cost.values[idx];
        if (step <= lf.h1()) trace.loop_free_cost += cost.values[idx];

        const auto& row = mdp.row(state, action);
        double u = rng.uniform();
        double acc = 0.0;
        int next = row.back().next;
        for (const auto& tr : row) {
            acc += tr.prob;
            if (u < acc) {
                next = tr.next;
                break;
            }
        }
        if (next == kGoal) break;
        if (step == kEpisodeStepCap) trace.flat.truncated = true;
        state = next;
    }
    // In the loop-free instance, an episode still running at layer H1 is
    // routed through the fast state for all remaining layers.
    trace.alive_after_h1 = trace.flat.steps >= lf.h1();
    if (trace.alive_after_h1) trace.loop_free_cost += lf.h2();
    return trace;
}

}  // namespace ssplab
