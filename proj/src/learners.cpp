#include "ssplab/learners.hpp"

#include <algorithm>
#include <cmath>

namespace ssplab {

namespace {

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
}

std::vector<double> to_std(const Eigen::VectorXd& v) {
    return {v.data(), v.data() + v.size()};
}

/// Fixed panel of feasible points with the precomputations needed to
/// evaluate weighted-entropy step objectives in two matrix products.
struct EntropicAudit {
    bool enabled = false;
    Eigen::MatrixXd panel;    // count x n
    Eigen::VectorXd entropy;  // per point: sum_i w p ln p
    Eigen::VectorXd wsum;     // per point: sum_i w p

    void build(const FlowPolytope& poly, const std::vector<Eigen::VectorXd>& points) {
        const int count = static_cast<int>(points.size());
        const int n = static_cast<int>(poly.weight.size());
        panel.resize(count, n);
        entropy.resize(count);
        wsum.resize(count);
        for (int r = 0; r < count; ++r) {
            panel.row(r) = points[r].transpose();
            double ent = 0.0, ws = 0.0;
            for (int i = 0; i < n; ++i) {
                const double wp = poly.weight(i) * points[r](i);
                ws += wp;
                if (points[r](i) > 0.0) ent += wp * std::log(points[r](i));
            }
            entropy(r) = ent;
            wsum(r) = ws;
        }
        enabled = true;
    }

    /// min over panel points of objective(point) - objective(output).
    double margin(const FlowPolytope& poly, const Eigen::VectorXd& cost,
                  const Eigen::VectorXd& q_prev, double eta, double obj_out) const {
        Eigen::VectorXd lnqk = q_prev.array().max(1e-300).log().matrix();
        Eigen::VectorXd lin = panel * poly.weight.cwiseProduct(cost);
        Eigen::VectorXd cross = panel * poly.weight.cwiseProduct(lnqk);
        const double wqk = poly.weight.dot(q_prev);
        double best = std::numeric_limits<double>::infinity();
        for (int r = 0; r < panel.rows(); ++r) {
            double obj = lin(r) + (entropy(r) - cross(r) - wsum(r) + wqk) / eta;
            best = std::min(best, obj - obj_out);
        }
        return best;
    }
};

struct BarrierAudit {
    bool enabled = false;
    Eigen::MatrixXd zpanel;  // count x pairs (skew-weighted aggregates)

    double margin(const BarrierObjective& obj, double obj_out) const {
        double best = std::numeric_limits<double>::infinity();
        for (int r = 0; r < zpanel.rows(); ++r) {
            Eigen::VectorXd z = zpanel.row(r).transpose();
            best = std::min(best, barrier_objective_value(obj, z) - obj_out);
        }
        return best;
    }
};

}  // namespace

DerivedParams derive_parameters(const SspMdp& mdp, const LearnerConfig& config) {
    if (config.episodes < 2) throw ParameterViolationError("learner needs K >= 2");
    FastPolicyResult fast = compute_fast_policy(mdp);
    DerivedParams d;
    d.sa = static_cast<double>(mdp.num_pairs());
    d.diameter = fast.diameter;
    d.t_fast = fast.hitting_times[mdp.initial_state()];
    const double K = static_cast<double>(config.episodes);
    const double T = config.hitting_bound;
    const double D = d.diameter;
    d.h1 = config.h1 > 0 ? config.h1 : static_cast<int>(std::ceil(std::cbrt(K)));
    d.h2 = static_cast<int>(std::ceil(4.0 * D * std::log(4.0 * K / config.delta)));
    const double H = static_cast<double>(d.h1 + d.h2);

    const bool needs_t = config.algorithm != "adaptive";
    if (needs_t && !(T > 0.0))
        throw ParameterViolationError("algorithm '" + config.algorithm + "' requires T > 0");

    if (config.algorithm == "oreps") {
        d.eta = std::min(0.5, std::sqrt(T * std::log(d.sa * T) / (D * K)));
    } else if (config.algorithm == "adaptive") {
        // Worker and expert rates derive from the scales b(j); see below.
    } else if (config.algorithm == "skewed") {
        d.eta = std::min(0.5, std::sqrt(T / (D * K)));
        d.lambda = std::sqrt(std::log(1.0 / config.delta) / (D * T * K));
    } else if (config.algorithm == "bandit") {
        d.eta = std::sqrt(d.sa / (D * T * K));
        d.lambda = 8.0 * d.eta;
    } else if (config.algorithm == "bandit-hp") {
        d.beta = std::exp(1.0 / (7.0 * std::log(K)));
        d.conc_factor = std::ceil(std::log2(T * std::pow(K, 4))) *
                        std::ceil(std::log2(T * T * std::pow(K, 9)));
        d.eta = std::sqrt(d.sa * std::log(1.0 / config.delta) / (D * T * K));
        double boost = 1.0 + d.conc_factor *
                                 std::sqrt(8.0 * std::log(d.conc_factor * d.sa / config.delta));
        d.gamma = 100.0 * d.eta * std::log(K) * boost * boost;
        d.gamma_effective = config.paper_gamma ? d.gamma : std::min(d.gamma, 0.5 / H);
        d.lambda = 40.0 * d.eta + 2.0 * d.gamma_effective;
        d.floor = 1.0 / (T * std::pow(K, 4));
        d.rho1 = 2.0 * T;
    } else {
        throw ParseError("unknown algorithm id: " + config.algorithm);
    }
    return d;
}

Eigen::VectorXd bandit_estimator(const LoopFreeMdp& lf, const SigmaTrace& trace,
                                 const std::vector<double>& observed_cost,
                                 const std::vector<char>& observed,
                                 const Eigen::VectorXd& q_plain) {
    Eigen::VectorXd chat = Eigen::VectorXd::Zero(lf.num_pairs());
    std::vector<int> count(lf.num_pairs(), 0);
    for (int v : trace.layered_vars) ++count[lf.pair_of_var(v)];
    for (int pid = 0; pid < lf.fast_pair(); ++pid) {
        if (count[pid] == 0) continue;
        const int g = lf.base_pair(pid);
        if (!observed[g])
            throw DivisionHazardError("visited pair carries no observed cost");
        if (q_plain(pid) < 1e-300)
            throw DivisionHazardError("visited pair has zero occupancy");
        chat(pid) = count[pid] * observed_cost[g] / q_plain(pid);
    }
    if (trace.alive_after_h1) {
        if (q_plain(lf.fast_pair()) < 1e-300)
            throw DivisionHazardError("fast pair has zero occupancy");
        chat(lf.fast_pair()) = lf.h2() / q_plain(lf.fast_pair());  // fast cost is 1
    }
    return chat;
}

Eigen::VectorXd bias_vector(const Eigen::VectorXd& chat, const Eigen::VectorXd& q_hsum,
                            const Eigen::VectorXd& q_plain) {
    Eigen::VectorXd bhat = Eigen::VectorXd::Zero(chat.size());
    for (int i = 0; i < chat.size(); ++i)
        if (chat(i) != 0.0 && q_plain(i) > 0.0) bhat(i) = q_hsum(i) * chat(i) / q_plain(i);
    return bhat;
}

Eigen::VectorXd strict_interior_point(const LoopFreeMdp& lf, const StationaryPolicy& fast,
                                      double T, double floor) {
    LayeredPolicy uniform;
    uniform.probs.resize(lf.h1());
    for (int h = 1; h <= lf.h1(); ++h) {
        const auto& states = lf.states_at(h);
        uniform.probs[h - 1].resize(states.size());
        for (std::size_t i = 0; i < states.size(); ++i) {
            const int na = lf.base().num_actions(states[i]);
            uniform.probs[h - 1][i].assign(na, 1.0 / na);
        }
    }
    Eigen::VectorXd q_unif = to_eigen(lf.occupancy_of(uniform));
    Eigen::VectorXd q_fast = to_eigen(lf.occupancy_of(lf.lift(fast)));
    const double m_u = lf.mass(to_std(q_unif));
    const double m_f = lf.mass(to_std(q_fast));
    if (m_f >= T)
        throw ParameterViolationError(
            "layered space is empty: the lifted fast policy's mass exceeds T; increase T or H1");
    const double target = m_f + 0.9 * (T - m_f);
    Eigen::VectorXd q = q_unif;
    if (m_u > target) {
        const double theta = (target - m_f) / (m_u - m_f);
        q = theta * q_unif + (1.0 - theta) * q_fast;
    }
    if (floor > 0.0) {
        Eigen::VectorXd agg = lf.aggregate(0.0) * q;
        if (agg.minCoeff() < 2.0 * floor)
            throw InfeasibleFloorError(
                "floored layered space has no usable interior; K is too small for the floor");
    }
    return q;
}

OccupancyMeasure random_flat_feasible(const SspMdp& mdp, double T, const OccupancyMeasure& anchor,
                                      Rng& rng) {
    StationaryPolicy pol;
    pol.probs.resize(mdp.num_states());
    for (int s = 0; s < mdp.num_states(); ++s) pol.probs[s] = rng.simplex(mdp.num_actions(s));
    // Mix toward the anchor's policy support for guaranteed properness.
    StationaryPolicy anchor_pol = policy_of_occupancy(mdp, anchor);
    for (int s = 0; s < mdp.num_states(); ++s)
        for (int a = 0; a < mdp.num_actions(s); ++a)
            pol.probs[s][a] = 0.9 * pol.probs[s][a] + 0.1 * anchor_pol.probs[s][a];
    OccupancyMeasure q = occupancy_of_policy(mdp, pol);
    const double m = q.total_mass();
    const double m_a = anchor.total_mass();
    const double target = m_a + 0.97 * (T - m_a);
    if (m > target) {
        const double theta = (target - m_a) / (m - m_a);
        for (int i = 0; i < mdp.num_pairs(); ++i)
            q.values[i] = theta * q.values[i] + (1.0 - theta) * anchor.values[i];
    }
    return q;
}

Eigen::VectorXd random_layered_feasible(const LoopFreeMdp& lf, double T, double floor,
                                        const Eigen::VectorXd& anchor,
                                        const Eigen::VectorXd& center, Rng& rng) {
    LayeredPolicy pol;
    pol.probs.resize(lf.h1());
    for (int h = 1; h <= lf.h1(); ++h) {
        const auto& states = lf.states_at(h);
        pol.probs[h - 1].resize(states.size());
        for (std::size_t i = 0; i < states.size(); ++i)
            pol.probs[h - 1][i] = rng.simplex(lf.base().num_actions(states[i]));
    }
    Eigen::VectorXd q = to_eigen(lf.occupancy_of(pol));
    const double m = lf.mass(to_std(q));
    const double m_a = lf.mass(to_std(std::vector<double>(anchor.data(),
                                                          anchor.data() + anchor.size())));
    const double target = m_a + 0.97 * (T - m_a);
    if (m > target) {
        const double theta = (target - m_a) / (m - m_a);
        q = theta * q + (1.0 - theta) * anchor;
    }
    if (floor > 0.0) q = 0.5 * q + 0.5 * center;
    return q;
}

namespace {

// ---------------------------------------------------------------------------
// SSP-O-REPS: entropic OMD on the flat occupancy space.
// ---------------------------------------------------------------------------
class OrepsLearner final : public Learner {
  public:
    OrepsLearner(const SspMdp& mdp, const FastPolicyResult& fast, double T, double eta)
        : mdp_(&mdp), eta_(eta), solver_(flat_polytope(mdp, T)) {
        const double t_fast = fast.hitting_times[mdp.initial_state()];
        if (T < t_fast - 1e-12)
            throw ParameterViolationError("T is below the fast policy's hitting time");
        anchor_ = occupancy_of_policy(mdp, fast.policy);
        Eigen::VectorXd lnref = Eigen::VectorXd::Constant(mdp.num_pairs(), -1.0);
        EntropicResult init = solver_.project(lnref, eta_);
        q_ = init.q;
        note(init.diag);
    }

    FeedbackMode feedback_mode() const override { return FeedbackMode::kFull; }

    ExecutionPlan plan(int) override {
        ExecutionPlan p;
        p.stationary = policy_of_occupancy(*mdp_, OccupancyMeasure{to_std(q_)});
        return p;
    }

    void observe(const Feedback& fb) override {
        Eigen::VectorXd cost = to_eigen(fb.full_cost.values);
        Eigen::VectorXd q_prev = q_;
        EntropicResult res = omd_step_entropy(solver_, q_prev, cost, eta_);
        if (audit_.enabled) {
            double obj = entropic_objective(solver_.polytope(), cost, q_prev, eta_, res.q);
            double m = audit_.margin(solver_.polytope(), cost, q_prev, eta_, obj);
            diag_.worst_audit_margin = std::min(diag_.worst_audit_margin, m);
            ++diag_.audited_steps;
        }
        q_ = res.q;
        note(res.diag);
        ++diag_.steps;
    }

    void enable_step_audit(int count, std::uint64_t seed) override {
        Rng rng(seed);
        std::vector<Eigen::VectorXd> pts;
        pts.reserve(count);
        for (int i = 0; i < count; ++i)
            pts.push_back(to_eigen(
                random_flat_feasible(*mdp_, solver_.polytope().mass_bound, anchor_, rng).values));
        audit_.build(solver_.polytope(), pts);
    }

  private:
    void note(const SolveDiagnostics& d) {
        diag_.total_solver_iterations += d.iterations;
        diag_.max_kkt = std::max(diag_.max_kkt, d.kkt_residual);
        Eigen::VectorXd qv = q_;
        diag_.max_feasibility =
            std::max(diag_.max_feasibility, check_membership(solver_.polytope(), qv).max_violation());
    }

    const SspMdp* mdp_;
    double eta_;
    EntropicSolver solver_;
    Eigen::VectorXd q_;
    OccupancyMeasure anchor_;
    EntropicAudit audit_;
};

// ---------------------------------------------------------------------------
// Adaptive SSP-O-REPS: multi-scale experts over O-REPS instances.
// ---------------------------------------------------------------------------
class AdaptiveLearner final : public Learner {
  public:
    AdaptiveLearner(const SspMdp& mdp, const LearnerConfig& cfg, const FastPolicyResult& fast)
        : mdp_(&mdp), rng_(mix_seed(cfg.seed, 0x5eedULL)) {
        const double t_fast = fast.hitting_times[mdp.initial_state()];
        meta_ = multiscale_init(t_fast, cfg.episodes, fast.diameter);
        anchor_ = occupancy_of_policy(mdp, fast.policy);
        const double K = static_cast<double>(cfg.episodes);
        const double D = fast.diameter;
        const double sa = static_cast<double>(mdp.num_pairs());
        for (int j = 0; j < meta_.size(); ++j) {
            const double b = meta_.scale[j];
            const double eta = std::min(0.5, std::sqrt(b * std::log(sa * b) / (D * K)));
            workers_.emplace_back(Worker{b, eta, EntropicSolver(flat_polytope(mdp, b)), {}});
            Worker& w = workers_.back();
            Eigen::VectorXd lnref = Eigen::VectorXd::Constant(mdp.num_pairs(), -1.0);
            EntropicResult init = w.solver.project(lnref, eta);
            w.q = init.q;
            note(w, init.diag);
        }
    }

    FeedbackMode feedback_mode() const override { return FeedbackMode::kFull; }

    ExecutionPlan plan(int) override {
        const int j = rng_.discrete(meta_.p);
        ExecutionPlan p;
        p.stationary = policy_of_occupancy(*mdp_, OccupancyMeasure{to_std(workers_[j].q)});
        return p;
    }

    void observe(const Feedback& fb) override {
        Eigen::VectorXd cost = to_eigen(fb.full_cost.values);
        std::vector<double> losses(workers_.size());
        for (std::size_t j = 0; j < workers_.size(); ++j) losses[j] = workers_[j].q.dot(cost);
        for (std::size_t j = 0; j < workers_.size(); ++j) {
            Worker& w = workers_[j];
            Eigen::VectorXd q_prev = w.q;
            EntropicResult res = omd_step_entropy(w.solver, q_prev, cost, w.eta);
            if (audits_.size() == workers_.size() && audits_[j].enabled) {
                double obj = entropic_objective(w.solver.polytope(), cost, q_prev, w.eta, res.q);
                double m = audits_[j].margin(w.solver.polytope(), cost, q_prev, w.eta, obj);
                diag_.worst_audit_margin = std::min(diag_.worst_audit_margin, m);
                ++diag_.audited_steps;
            }
            w.q = res.q;
            note(w, res.diag);
        }
        multiscale_update(meta_, losses);
        ++diag_.steps;
    }

    void enable_step_audit(int count, std::uint64_t seed) override {
        audits_.resize(workers_.size());
        for (std::size_t j = 0; j < workers_.size(); ++j) {
            Rng rng(mix_seed(seed, j));
            std::vector<Eigen::VectorXd> pts;
            pts.reserve(count);
            for (int i = 0; i < count; ++i)
                pts.push_back(to_eigen(
                    random_flat_feasible(*mdp_, workers_[j].b, anchor_, rng).values));
            audits_[j].build(workers_[j].solver.polytope(), pts);
        }
    }

    const ExpertState& expert_state() const { return meta_; }

  private:
    struct Worker {
        double b;
        double eta;
        EntropicSolver solver;
        Eigen::VectorXd q;
    };

    void note(Worker& w, const SolveDiagnostics& d) {
        diag_.total_solver_iterations += d.iterations;
        diag_.max_kkt = std::max(diag_.max_kkt, d.kkt_residual);
        diag_.max_feasibility =
            std::max(diag_.max_feasibility, check_membership(w.solver.polytope(), w.q).max_violation());
    }

    const SspMdp* mdp_;
    Rng rng_;
    ExpertState meta_;
    std::vector<Worker> workers_;
    OccupancyMeasure anchor_;
    std::vector<EntropicAudit> audits_;
};

// ---------------------------------------------------------------------------
// Loop-free + skewed space learner (full information, high probability).
// ---------------------------------------------------------------------------
class SkewedLearner final : public Learner {
  public:
    SkewedLearner(const SspMdp& mdp, const FastPolicyResult& fast, double T, double eta,
                  double lambda, int h1, int h2)
        : lf_(mdp, h1, h2),
          fast_(fast.policy),
          eta_(eta),
          lambda_(lambda),
          solver_(lf_.polytope(T, lambda)) {
        Eigen::VectorXd lnref =
            (-1.0 - solver_.polytope().weight.array().log()).matrix();
        EntropicResult init = solver_.project(lnref, eta_);
        q_ = init.q;
        note(init.diag);
        center_ = strict_interior_point(lf_, fast_, T, 0.0);
    }

    FeedbackMode feedback_mode() const override { return FeedbackMode::kFull; }

    ExecutionPlan plan(int) override {
        ExecutionPlan p;
        p.sigma = SigmaPlan{&lf_, lf_.policy_of(to_std(q_)), fast_};
        return p;
    }

    void observe(const Feedback& fb) override {
        Eigen::VectorXd cost = to_eigen(lf_.lift_cost(fb.full_cost));
        Eigen::VectorXd q_prev = q_;
        EntropicResult res = omd_step_skewed(solver_, q_prev, cost, eta_);
        if (audit_.enabled) {
            double obj = entropic_objective(solver_.polytope(), cost, q_prev, eta_, res.q);
            double m = audit_.margin(solver_.polytope(), cost, q_prev, eta_, obj);
            diag_.worst_audit_margin = std::min(diag_.worst_audit_margin, m);
            ++diag_.audited_steps;
        }
        q_ = res.q;
        note(res.diag);
        ++diag_.steps;
    }

    void enable_step_audit(int count, std::uint64_t seed) override {
        Rng rng(seed);
        Eigen::VectorXd anchor = to_eigen(lf_.occupancy_of(lf_.lift(fast_)));
        std::vector<Eigen::VectorXd> pts;
        pts.reserve(count);
        for (int i = 0; i < count; ++i)
            pts.push_back(random_layered_feasible(lf_, solver_.polytope().mass_bound, 0.0, anchor,
                                                  center_, rng));
        audit_.build(solver_.polytope(), pts);
    }

    const LoopFreeMdp& loop_free() const { return lf_; }

  private:
    void note(const SolveDiagnostics& d) {
        diag_.total_solver_iterations += d.iterations;
        diag_.max_kkt = std::max(diag_.max_kkt, d.kkt_residual);
        Eigen::VectorXd qv = q_;
        diag_.max_feasibility =
            std::max(diag_.max_feasibility, check_membership(solver_.polytope(), qv).max_violation());
    }

    LoopFreeMdp lf_;
    StationaryPolicy fast_;
    double eta_, lambda_;
    EntropicSolver solver_;
    Eigen::VectorXd q_;
    Eigen::VectorXd center_;
    EntropicAudit audit_;
};

// ---------------------------------------------------------------------------
// Log-barrier bandit learners.
// ---------------------------------------------------------------------------
class BanditLearner final : public Learner {
  public:
    BanditLearner(const SspMdp& mdp, const FastPolicyResult& fast, const DerivedParams& d,
                  double T, bool high_probability, double beta)
        : lf_(mdp, d.h1, d.h2),
          fast_(fast.policy),
          hp_(high_probability),
          gamma_(high_probability ? d.gamma_effective : 0.0),
          beta_(beta),
          floor_(high_probability ? d.floor : 0.0),
          lambda_(d.lambda),
          agg_plain_(lf_.aggregate(0.0)),
          agg_hsum_(lf_.aggregate_hsum()),
          stepper_(lf_.polytope(T, d.lambda), lf_.aggregate(d.lambda), lf_.aggregate(0.0),
                   floor_),
          inv_rate_(Eigen::VectorXd::Constant(lf_.num_pairs(), 1.0 / d.eta)) {
        if (hp_) {
            rho_ = Eigen::VectorXd::Constant(lf_.num_pairs(), d.rho1);
            rate_increases_.assign(lf_.num_pairs(), 0);
        }
        center_ = strict_interior_point(lf_, fast_, T, floor_);
        BarrierObjective init;
        init.init_mode = true;
        init.inv_rate = inv_rate_;
        init.loss = Eigen::VectorXd::Zero(lf_.num_pairs());
        BarrierResult res = stepper_.step(init, center_, /*warm=*/false);
        q_ = res.q;
        z_ = res.z;
        note(res.diag);
    }

    FeedbackMode feedback_mode() const override { return FeedbackMode::kBandit; }

    ExecutionPlan plan(int) override {
        ExecutionPlan p;
        p.sigma = SigmaPlan{&lf_, lf_.policy_of(to_std(q_)), fast_};
        return p;
    }

    void observe(const Feedback& fb) override {
        Eigen::VectorXd q_plain = agg_plain_ * q_;
        Eigen::VectorXd chat =
            bandit_estimator(lf_, *fb.sigma_trace, fb.observed_cost, fb.observed, q_plain);
        BarrierObjective obj;
        obj.inv_rate = inv_rate_;
        obj.z_prev = z_;
        if (hp_) {
            Eigen::VectorXd bhat = bias_vector(chat, agg_hsum_ * q_, q_plain);
            obj.loss = chat - gamma_ * bhat;
            diag_.min_fed_loss = std::min(diag_.min_fed_loss, obj.loss.minCoeff());
        } else {
            obj.loss = chat;
        }
        BarrierResult res = stepper_.step(obj, q_, /*warm=*/true);
        if (audit_.enabled) {
            double out = barrier_objective_value(obj, res.z);
            double m = audit_.margin(obj, out);
            diag_.worst_audit_margin = std::min(diag_.worst_audit_margin, m);
            ++diag_.audited_steps;
        }
        q_ = res.q;
        z_ = res.z;
        note(res.diag);
        if (hp_) {
            // Increasing learning rates: whenever an aggregate drops below
            // the tracked threshold, bump its rate and tighten the threshold.
            for (int i = 0; i < z_.size(); ++i)
                if (1.0 / z_(i) > rho_(i)) {
                    rho_(i) = 2.0 / z_(i);
                    inv_rate_(i) /= beta_;
                    diag_.max_rate_increases =
                        std::max(diag_.max_rate_increases, ++rate_increases_[i]);
                }
        }
        ++diag_.steps;
    }

    void enable_step_audit(int count, std::uint64_t seed) override {
        Rng rng(seed);
        Eigen::VectorXd anchor = to_eigen(lf_.occupancy_of(lf_.lift(fast_)));
        Eigen::SparseMatrix<double> agg_w = lf_.aggregate(lambda_);
        audit_.zpanel.resize(count, lf_.num_pairs());
        for (int i = 0; i < count; ++i) {
            Eigen::VectorXd p = random_layered_feasible(
                lf_, stepper_.polytope().mass_bound, floor_, anchor, center_, rng);
            audit_.zpanel.row(i) = (agg_w * p).transpose();
        }
        audit_.enabled = true;
    }

    const LoopFreeMdp& loop_free() const { return lf_; }
    const Eigen::VectorXd& rates_inverse() const { return inv_rate_; }

  private:
    void note(const SolveDiagnostics& d) {
        diag_.total_solver_iterations += d.iterations;
        diag_.max_kkt = std::max(diag_.max_kkt, d.kkt_residual);
        diag_.max_feasibility = std::max(
            diag_.max_feasibility,
            check_layered_membership(lf_, to_std(q_), stepper_.polytope().mass_bound, lambda_,
                                     floor_)
                .max_violation());
    }

    LoopFreeMdp lf_;
    StationaryPolicy fast_;
    bool hp_;
    double gamma_, beta_, floor_, lambda_;
    Eigen::SparseMatrix<double> agg_plain_, agg_hsum_;
    BarrierStepper stepper_;
    Eigen::VectorXd inv_rate_;
    Eigen::VectorXd rho_;
    std::vector<int> rate_increases_;
    Eigen::VectorXd q_, z_, center_;
    BarrierAudit audit_;
};

class FixedPolicyLearner final : public Learner {
  public:
    FixedPolicyLearner(const SspMdp&, StationaryPolicy policy) : policy_(std::move(policy)) {}
    FeedbackMode feedback_mode() const override { return FeedbackMode::kFull; }
    ExecutionPlan plan(int) override {
        ExecutionPlan p;
        p.stationary = policy_;
        return p;
    }
    void observe(const Feedback&) override { ++diag_.steps; }
    void enable_step_audit(int, std::uint64_t) override {}

  private:
    StationaryPolicy policy_;
};

}  // namespace

std::unique_ptr<Learner> make_learner(const SspMdp& mdp, const LearnerConfig& config) {
    DerivedParams d = derive_parameters(mdp, config);
    FastPolicyResult fast = compute_fast_policy(mdp);
    if (config.algorithm == "oreps")
        return std::make_unique<OrepsLearner>(mdp, fast, config.hitting_bound, d.eta);
    if (config.algorithm == "adaptive")
        return std::make_unique<AdaptiveLearner>(mdp, config, fast);
    if (config.algorithm == "skewed")
        return std::make_unique<SkewedLearner>(mdp, fast, config.hitting_bound, d.eta, d.lambda,
                                               d.h1, d.h2);
    if (config.algorithm == "bandit")
        return std::make_unique<BanditLearner>(mdp, fast, d, config.hitting_bound, false, 0.0);
    if (config.algorithm == "bandit-hp")
        return std::make_unique<BanditLearner>(mdp, fast, d, config.hitting_bound, true, d.beta);
    throw ParseError("unknown algorithm id: " + config.algorithm);
}

std::unique_ptr<Learner> make_fixed_policy_learner(const SspMdp& mdp, StationaryPolicy policy) {
    return std::make_unique<FixedPolicyLearner>(mdp, std::move(policy));
}

}  // namespace ssplab
