#include "ssplab/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <thread>

namespace ssplab {

using nlohmann::json;

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

TrialResult run_trial(const SspMdp& mdp, const ExperimentConfig& config, int trial,
                      const AdversaryFactory& adversary_factory) {
    TrialResult result;
    result.trial = trial;
    const std::uint64_t trial_seed = mix_seed(config.seed, static_cast<std::uint64_t>(trial));
    try {
        LearnerConfig lcfg = config.learner;
        lcfg.seed = mix_seed(trial_seed, 1);
        std::unique_ptr<Learner> learner = make_learner(mdp, lcfg);
        if (config.audit_points > 0)
            learner->enable_step_audit(config.audit_points, config.audit_seed);
        std::unique_ptr<Adversary> adversary = adversary_factory(mix_seed(trial_seed, 2));
        const std::uint64_t sim_seed = mix_seed(trial_seed, 3);
        const int K = lcfg.episodes;
        const FeedbackMode mode = learner->feedback_mode();

        PublicHistory history;
        std::vector<CostFunction> realized;
        realized.reserve(K);
        CostFunction mean_cost;
        mean_cost.values.assign(mdp.num_pairs(), 0.0);
        result.cum_learner.reserve(K);
        double cum = 0.0;

        for (int k = 1; k <= K; ++k) {
            CostFunction c = adversary->cost(k, history);
            ExecutionPlan plan = learner->plan(k);
            Rng ep_rng(mix_seed(sim_seed, static_cast<std::uint64_t>(k)));

            EpisodeTrace trace;
            SigmaTrace strace;
            if (plan.sigma) {
                strace = simulate_sigma_episode(*plan.sigma->loop_free, plan.sigma->policy,
                                                plan.sigma->fast, c, ep_rng);
                trace = strace.flat;
            } else {
                trace = simulate_episode(mdp, make_stationary_executor(mdp, *plan.stationary), c,
                                         ep_rng);
            }
            if (trace.truncated) ++result.truncated_episodes;
            cum += trace.incurred_cost;
            result.cum_learner.push_back(cum);

            Feedback fb;
            fb.mode = mode;
            if (plan.sigma) fb.sigma_trace = &strace;
            if (mode == FeedbackMode::kFull) {
                fb.full_cost = c;
            } else {
                // Feedback filter: only visited pairs carry a cost value.
                fb.observed.assign(mdp.num_pairs(), 0);
                fb.observed_cost.assign(mdp.num_pairs(), 0.0);
                for (int i = 0; i < mdp.num_pairs(); ++i)
                    if (trace.visits[i] > 0) {
                        fb.observed[i] = 1;
                        fb.observed_cost[i] = c.values[i];
                    }
            }
            learner->observe(fb);

            history.traces.push_back(trace);
            if (mode == FeedbackMode::kFull) history.revealed_costs.push_back(c);
            for (int i = 0; i < mdp.num_pairs(); ++i) mean_cost.values[i] += c.values[i];
            realized.push_back(std::move(c));
        }

        for (double& v : mean_cost.values) v /= static_cast<double>(K);
        BestFixedPolicyResult best =
            best_fixed_policy_for_average(mdp, mean_cost, static_cast<double>(K));
        OccupancyMeasure qstar = occupancy_of_policy(mdp, best.policy);
        result.cum_comparator.reserve(K);
        double cum_cmp = 0.0;
        for (int k = 0; k < K; ++k) {
            double jk = 0.0;
            for (int i = 0; i < mdp.num_pairs(); ++i)
                jk += qstar.values[i] * realized[k].values[i];
            cum_cmp += jk;
            result.cum_comparator.push_back(cum_cmp);
        }
        result.regret = result.cum_learner.back() - result.cum_comparator.back();
        result.diagnostics = learner->run_diagnostics();
    } catch (const std::exception& e) {
        result.failed = true;
        result.error = e.what();
    }
    return result;
}

}  // namespace

RegretReport run_experiment(const SspMdp& mdp, const ExperimentConfig& config,
                            const AdversaryFactory& adversary) {
    RegretReport report;
    report.episodes = config.learner.episodes;
    report.trials.resize(config.trials);
    const int jobs = std::max(1, std::min(config.jobs, config.trials));
    if (jobs == 1) {
        for (int t = 0; t < config.trials; ++t)
            report.trials[t] = run_trial(mdp, config, t, adversary);
    } else {
        std::vector<std::thread> pool;
        std::atomic<int> next{0};
        for (int w = 0; w < jobs; ++w)
            pool.emplace_back([&] {
                for (int t = next.fetch_add(1); t < config.trials; t = next.fetch_add(1))
                    report.trials[t] = run_trial(mdp, config, t, adversary);
            });
        for (auto& th : pool) th.join();
    }
    double mean = 0.0;
    int ok = 0;
    for (const auto& t : report.trials)
        if (!t.failed) {
            mean += t.regret;
            ++ok;
        }
    if (ok > 0) mean /= ok;
    double var = 0.0;
    for (const auto& t : report.trials)
        if (!t.failed) var += (t.regret - mean) * (t.regret - mean);
    report.mean_regret = mean;
    report.std_regret = ok > 1 ? std::sqrt(var / (ok - 1)) : 0.0;
    return report;
}

std::string report_to_csv(const RegretReport& report) {
    std::string out = "trial,episode,cum_learner_cost,cum_comparator_cost,regret\n";
    for (const auto& t : report.trials) {
        if (t.failed) continue;
        for (std::size_t k = 0; k < t.cum_learner.size(); ++k) {
            out += std::to_string(t.trial);
            out += ',';
            out += std::to_string(k + 1);
            out += ',';
            out += fmt_double(t.cum_learner[k]);
            out += ',';
            out += fmt_double(t.cum_comparator[k]);
            out += ',';
            out += fmt_double(t.cum_learner[k] - t.cum_comparator[k]);
            out += '\n';
        }
    }
    return out;
}

namespace {

json diagnostics_to_json(const LearnerRunDiagnostics& d) {
    json j;
    j["steps"] = d.steps;
    j["solver_iterations"] = d.total_solver_iterations;
    j["max_kkt_residual"] = d.max_kkt;
    j["max_feasibility_residual"] = d.max_feasibility;
    if (d.audited_steps > 0) {
        j["audited_steps"] = d.audited_steps;
        j["worst_audit_margin"] = d.worst_audit_margin;
    }
    if (d.steps > 0 && d.min_fed_loss != std::numeric_limits<double>::infinity())
        j["min_fed_loss"] = d.min_fed_loss;
    if (d.max_rate_increases > 0) j["max_rate_increases"] = d.max_rate_increases;
    return j;
}

json config_to_json(const ExperimentConfig& c) {
    json j;
    j["algorithm"] = c.learner.algorithm;
    j["episodes"] = c.learner.episodes;
    j["T"] = c.learner.hitting_bound;
    j["H1"] = c.learner.h1;
    j["delta"] = c.learner.delta;
    j["trials"] = c.trials;
    j["seed"] = c.seed;
    j["audit_points"] = c.audit_points;
    return j;
}

}  // namespace

std::string report_to_json(const ExperimentConfig& config, const RegretReport& report) {
    json j;
    j["config"] = config_to_json(config);
    j["mean_regret"] = report.mean_regret;
    j["std_regret"] = report.std_regret;
    json trials = json::array();
    for (const auto& t : report.trials) {
        json tj;
        tj["trial"] = t.trial;
        if (t.failed) {
            tj["failed"] = true;
            tj["error"] = t.error;
        } else {
            tj["regret"] = t.regret;
            tj["learner_total"] = t.cum_learner.back();
            tj["comparator_total"] = t.cum_comparator.back();
            tj["truncated_episodes"] = t.truncated_episodes;
            tj["diagnostics"] = diagnostics_to_json(t.diagnostics);
        }
        trials.push_back(tj);
    }
    j["trials"] = trials;
    return j.dump(2);
}

double fit_log_slope(const std::vector<std::pair<double, double>>& points) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (const auto& [x, y] : points) {
        if (y <= 0.0 || x <= 0.0) continue;
        const double lx = std::log(x), ly = std::log(y);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++n;
    }
    if (n < 2) return std::numeric_limits<double>::quiet_NaN();
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

SweepResult sweep(const SspMdp& mdp, const ExperimentConfig& base,
                  const std::vector<std::string>& algorithms, const std::vector<int>& episode_grid,
                  const AdversaryFactory& adversary) {
    SweepResult result;
    for (const auto& algo : algorithms) {
        std::vector<std::pair<double, double>> pts;
        for (int K : episode_grid) {
            ExperimentConfig cfg = base;
            cfg.learner.algorithm = algo;
            cfg.learner.episodes = K;
            SweepCell cell{algo, K, run_experiment(mdp, cfg, adversary)};
            pts.emplace_back(static_cast<double>(K), cell.report.mean_regret);
            result.cells.push_back(std::move(cell));
        }
        result.slopes[algo] = fit_log_slope(pts);
    }
    return result;
}

std::string sweep_to_json(const SweepResult& result) {
    json j;
    json cells = json::array();
    for (const auto& c : result.cells) {
        json cj;
        cj["algorithm"] = c.algorithm;
        cj["episodes"] = c.episodes;
        cj["mean_regret"] = c.report.mean_regret;
        cj["std_regret"] = c.report.std_regret;
        cells.push_back(cj);
    }
    j["cells"] = cells;
    j["slopes"] = result.slopes;
    return j.dump(2);
}

SspMdp toy3_mdp() {
    std::vector<std::vector<std::vector<Transition>>> rows(3);
    rows[0] = {{{1, 0.8}, {2, 0.2}}, {{2, 0.8}, {1, 0.2}}};
    rows[1] = {{{kGoal, 0.6}, {1, 0.4}}, {{kGoal, 0.9}, {1, 0.1}}};
    rows[2] = {{{kGoal, 0.6}, {2, 0.4}}, {{kGoal, 0.9}, {2, 0.1}}};
    return SspMdp(0, std::move(rows));
}

std::vector<CostFunction> toy3_alternating_costs() {
    CostFunction a, b;
    a.values = {0.10, 0.90, 0.20, 0.60, 0.70, 0.30};
    b.values = {0.80, 0.20, 0.70, 0.25, 0.20, 0.75};
    return {a, b};
}

// ---------------------------------------------------------------------------
// Monte-Carlo property suite
// ---------------------------------------------------------------------------

namespace {

struct Welford {
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

PropertyCheck bound_check(const std::string& name, double value, double bound, double slack,
                          const std::string& detail) {
    // Passes when value <= bound + slack; margin is the headroom.
    PropertyCheck c;
    c.name = name;
    c.margin = bound + slack - value;
    c.pass = c.margin >= 0.0;
    c.detail = detail;
    return c;
}

}  // namespace

std::vector<PropertyCheck> property_suite(const SspMdp& mdp, int samples, std::uint64_t seed) {
    std::vector<PropertyCheck> ledger;
    const int n = mdp.num_pairs();

    // Transition rows must be proper distributions (fails on corrupted files).
    {
        double worst = 0.0;
        for (int s = 0; s < mdp.num_states(); ++s)
            for (int a = 0; a < mdp.num_actions(s); ++a) {
                double total = 0.0;
                for (const auto& tr : mdp.row(s, a)) total += tr.prob;
                worst = std::max(worst, std::abs(total - 1.0));
            }
        ledger.push_back(bound_check("transition-rows-sum-to-1", worst, 0.0, 1e-12,
                                     "max |row sum - 1| = " + fmt_double(worst)));
    }

    FastPolicyResult fast = compute_fast_policy(mdp);
    // Test policy: uniform blended with the fast policy (always proper).
    StationaryPolicy pol = StationaryPolicy::uniform(mdp);
    for (int s = 0; s < mdp.num_states(); ++s)
        for (int a = 0; a < mdp.num_actions(s); ++a)
            pol.probs[s][a] = 0.8 * pol.probs[s][a] + 0.2 * fast.policy.probs[s][a];

    Rng cost_rng(mix_seed(seed, 0xC057ull));
    CostFunction cost;
    cost.values.resize(n);
    for (auto& v : cost.values) v = cost_rng.uniform(0.05, 1.0);

    OccupancyMeasure q = occupancy_of_policy(mdp, pol);
    std::vector<double> jvec = compute_cost_to_go(mdp, pol, cost);
    std::vector<double> tvec = compute_hitting_times(mdp, pol);
    const int s0 = mdp.initial_state();

    {
        double qc = 0.0;
        for (int i = 0; i < n; ++i) qc += q.values[i] * cost.values[i];
        ledger.push_back(bound_check("occupancy-cost-identity", std::abs(qc - jvec[s0]), 0.0, 1e-8,
                                     "<q,c> vs J(s0)"));
        ledger.push_back(bound_check("occupancy-mass-identity", std::abs(q.total_mass() - tvec[s0]),
                                     0.0, 1e-8, "sum q vs T(s0)"));
        ledger.push_back(bound_check("flow-membership",
                                     check_flat_membership(mdp, q, q.total_mass() + 1e-8)
                                         .max_violation(),
                                     0.0, 1e-8, "occupancy flow residual"));
    }

    // Monte-Carlo passes over the stationary policy.
    {
        std::vector<Welford> visit(n);
        Welford cost_sq;
        Welford tail4, tail8, tail16;
        const double tau = *std::max_element(tvec.begin(), tvec.end());
        const double m4 = 4.0 * tau, m8 = 8.0 * tau, m16 = 16.0 * tau;
        ExecutionPolicy exec = make_stationary_executor(mdp, pol);
        Rng rng(mix_seed(seed, 0x51Aull));
        for (int it = 0; it < samples; ++it) {
            EpisodeTrace tr = simulate_episode(mdp, exec, cost, rng);
            for (int i = 0; i < n; ++i) visit[i].add(static_cast<double>(tr.visits[i]));
            cost_sq.add(tr.incurred_cost * tr.incurred_cost);
            tail4.add(tr.steps > m4 ? 1.0 : 0.0);
            tail8.add(tr.steps > m8 ? 1.0 : 0.0);
            tail16.add(tr.steps > m16 ? 1.0 : 0.0);
        }
        double worst = -1e300;
        for (int i = 0; i < n; ++i) {
            double dev = std::abs(visit[i].mean - q.values[i]) - 4.0 * visit[i].se();
            worst = std::max(worst, dev);
        }
        ledger.push_back(bound_check("visit-mean-matches-occupancy", worst, 0.0, 0.0,
                                     "max |mean N - q| minus 4 SE"));
        double qj = 0.0;
        for (int s = 0; s < mdp.num_states(); ++s)
            for (int a = 0; a < mdp.num_actions(s); ++a)
                qj += q.values[mdp.pair_index(s, a)] * jvec[s];
        ledger.push_back(bound_check("episode-cost-second-moment", cost_sq.mean,
                                     2.0 * qj, 4.0 * cost_sq.se(),
                                     "E<N,c>^2 vs 2<q,J>"));
        ledger.push_back(bound_check("hitting-tail-4tau", tail4.mean,
                                     2.0 * std::exp(-m4 / (4.0 * tau)), 4.0 * tail4.se(), ""));
        ledger.push_back(bound_check("hitting-tail-8tau", tail8.mean,
                                     2.0 * std::exp(-m8 / (4.0 * tau)), 4.0 * tail8.se(), ""));
        ledger.push_back(bound_check("hitting-tail-16tau", tail16.mean,
                                     2.0 * std::exp(-m16 / (4.0 * tau)), 4.0 * tail16.se(), ""));
    }

    // Layered passes: variance bound, estimator and bias unbiasedness.
    {
        const double tmax = *std::max_element(tvec.begin(), tvec.end());
        const int h1 = std::max(8, static_cast<int>(std::ceil(4.0 * tmax)));
        const int h2 = static_cast<int>(std::ceil(4.0 * fast.diameter * std::log(4e4)));
        LoopFreeMdp lf(mdp, h1, h2);
        LayeredPolicy lpol = lf.lift(pol);
        std::vector<double> lq = lf.occupancy_of(lpol);
        Eigen::VectorXd qv = Eigen::Map<const Eigen::VectorXd>(lq.data(), lq.size());
        Eigen::VectorXd q_plain = lf.aggregate(0.0) * qv;
        Eigen::VectorXd q_hsum = lf.aggregate_hsum() * qv;

        const int pairs = lf.num_pairs();
        std::vector<Welford> chat_mean(pairs), bhat_mean(pairs), nc2(pairs);
        Welford lf_cost_sq;
        Rng rng(mix_seed(seed, 0x2AFull));
        std::vector<char> observed(n, 1);
        for (int it = 0; it < samples; ++it) {
            SigmaTrace tr = simulate_sigma_episode(lf, lpol, fast.policy, cost, rng);
            lf_cost_sq.add(tr.loop_free_cost * tr.loop_free_cost);
            Eigen::VectorXd chat = bandit_estimator(lf, tr, cost.values, observed, q_plain);
            Eigen::VectorXd bhat = bias_vector(chat, q_hsum, q_plain);
            std::vector<int> count(pairs, 0);
            for (int v : tr.layered_vars) ++count[lf.pair_of_var(v)];
            for (int p = 0; p < pairs; ++p) {
                chat_mean[p].add(chat(p));
                bhat_mean[p].add(bhat(p));
                double c2 = (p == lf.fast_pair())
                                ? 1.0
                                : cost.values[lf.base_pair(p)] * cost.values[lf.base_pair(p)];
                double cnt = (p == lf.fast_pair())
                                 ? (tr.alive_after_h1 ? lf.h2() : 0)
                                 : count[p];
                nc2[p].add(cnt * cnt * c2);
            }
        }
        double qh = lf.inner_hcost(lq, cost);
        ledger.push_back(bound_check("layered-cost-second-moment", lf_cost_sq.mean, 2.0 * qh,
                                     4.0 * lf_cost_sq.se(), "E<N~,c~>^2 vs 2<q,h.c>"));
        double worst_c = -1e300, worst_b = -1e300, worst_n = -1e300;
        for (int p = 0; p < pairs; ++p) {
            double target_c = (p == lf.fast_pair()) ? 1.0 : cost.values[lf.base_pair(p)];
            // E chat = c on the support of q.
            if (q_plain(p) > 1e-12) {
                worst_c = std::max(worst_c,
                                   std::abs(chat_mean[p].mean - target_c) - 4.0 * chat_mean[p].se());
                double target_b = q_hsum(p) * target_c / q_plain(p);
                worst_b = std::max(worst_b,
                                   std::abs(bhat_mean[p].mean - target_b) - 4.0 * bhat_mean[p].se());
                double bk = q_hsum(p) * target_c / q_plain(p);
                worst_n = std::max(worst_n, nc2[p].mean - 2.0 * q_plain(p) * bk -
                                                4.0 * nc2[p].se());
            }
        }
        ledger.push_back(bound_check("estimator-unbiased", worst_c, 0.0, 0.0,
                                     "max |mean chat - c| minus 4 SE"));
        ledger.push_back(bound_check("bias-vector-unbiased", worst_b, 0.0, 0.0,
                                     "max |mean bhat - b| minus 4 SE"));
        ledger.push_back(bound_check("visit-square-bound", worst_n, 0.0, 0.0,
                                     "E N~^2 c^2 vs 2 q b plus 4 SE"));
    }

    return ledger;
}

std::string property_ledger_to_json(const std::vector<PropertyCheck>& ledger) {
    json j = json::array();
    for (const auto& c : ledger) {
        json e;
        e["name"] = c.name;
        e["pass"] = c.pass;
        e["margin"] = c.margin;
        if (!c.detail.empty()) e["detail"] = c.detail;
        j.push_back(e);
    }
    return j.dump(2);
}

}  // namespace ssplab
