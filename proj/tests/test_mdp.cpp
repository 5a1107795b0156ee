#include <doctest.h>

#include "oracles.hpp"
#include "ssplab/adversaries.hpp"
#include "ssplab/harness.hpp"
#include "ssplab/json_io.hpp"
#include "ssplab/occupancy.hpp"

using namespace ssplab;

namespace {

SspMdp one_step_chain() {
    std::vector<std::vector<std::vector<Transition>>> rows(1);
    rows[0] = {{{kGoal, 1.0}}};
    return SspMdp(0, std::move(rows));
}

SspMdp geometric(double goal_prob) {
    std::vector<std::vector<std::vector<Transition>>> rows(1);
    rows[0] = {{{0, 1.0 - goal_prob}, {kGoal, goal_prob}}};
    return SspMdp(0, std::move(rows));
}

SspMdp chain3() {
    std::vector<std::vector<std::vector<Transition>>> rows(3);
    rows[0] = {{{1, 1.0}}};
    rows[1] = {{{2, 1.0}}};
    rows[2] = {{{kGoal, 1.0}}};
    return SspMdp(0, std::move(rows));
}

}  // namespace

TEST_CASE("hitting times: forced single step") {
    SspMdp mdp = one_step_chain();
    auto t = compute_hitting_times(mdp, StationaryPolicy::uniform(mdp));
    CHECK(t[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("hitting times: geometric self-loop") {
    SspMdp mdp = geometric(0.25);
    auto t = compute_hitting_times(mdp, StationaryPolicy::uniform(mdp));
    CHECK(t[0] == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("hitting times: lower-bound fast state") {
    auto inst = build_lower_bound(8.0, 32.0, 4096, FeedbackMode::kFull, 7);
    StationaryPolicy pol = inst.branch_policy(1);
    auto t = compute_hitting_times(inst.mdp, pol);
    const int f = inst.branches + 1;
    CHECK(t[f] == doctest::Approx(8.0).epsilon(1e-10));
}

TEST_CASE("hitting times: improper policy rejected") {
    std::vector<std::vector<std::vector<Transition>>> rows(1);
    rows[0] = {{{0, 1.0}}, {{kGoal, 1.0}}};
    SspMdp mdp(0, std::move(rows));
    StationaryPolicy loop = StationaryPolicy::deterministic(mdp, {0});
    CHECK_THROWS_AS(compute_hitting_times(mdp, loop), ImproperPolicyError);
}

TEST_CASE("cost-to-go: zero cost and unit cost") {
    SspMdp mdp = geometric(0.25);
    StationaryPolicy pol = StationaryPolicy::uniform(mdp);
    CostFunction zero{std::vector<double>(mdp.num_pairs(), 0.0)};
    CHECK(compute_cost_to_go(mdp, pol, zero)[0] == doctest::Approx(0.0));
    CostFunction unit{std::vector<double>(mdp.num_pairs(), 1.0)};
    CHECK(compute_cost_to_go(mdp, pol, unit)[0] == doctest::Approx(4.0).epsilon(1e-10));
}

TEST_CASE("cost-to-go: lower-bound branch policy averages D/2") {
    auto inst = build_lower_bound(8.0, 32.0, 4096, FeedbackMode::kFull, 21);
    StationaryPolicy pol = inst.branch_policy(inst.good_branch);
    OccupancyMeasure q = occupancy_of_policy(inst.mdp, pol);
    auto adv = make_lower_bound_adversary(inst);
    PublicHistory empty;
    oracles::MeanSe acc;
    for (int k = 1; k <= 20000; ++k) {
        CostFunction c = adv->cost(k, empty);
        // <q, c_k> equals J_k(s0); spot-check the identity on the first few.
        if (k <= 3) {
            double qc = 0.0;
            for (int i = 0; i < inst.mdp.num_pairs(); ++i) qc += q.values[i] * c.values[i];
            CHECK(qc ==
                  doctest::Approx(compute_cost_to_go(inst.mdp, pol, c)[0]).epsilon(1e-9));
        }
        double qc = 0.0;
        for (int i = 0; i < inst.mdp.num_pairs(); ++i) qc += q.values[i] * c.values[i];
        acc.add(qc);
    }
    CHECK(std::abs(acc.mean - 4.0) <= 4.0 * acc.se());  // D/2 = 4
}

TEST_CASE("fast policy: deterministic chain, dominant action, lower bound") {
    SspMdp chain = one_step_chain();
    CHECK(compute_fast_policy(chain).diameter == doctest::Approx(1.0));

    // Dominant action: a1 loops with probability 0.5, a2 exits surely.
    std::vector<std::vector<std::vector<Transition>>> rows(2);
    rows[0] = {{{0, 0.5}, {kGoal, 0.5}}, {{kGoal, 1.0}}};
    rows[1] = {{{kGoal, 1.0}}};
    SspMdp two(0, std::move(rows));
    FastPolicyResult fast = compute_fast_policy(two);
    CHECK(fast.policy.actions()[0] == 1);
    CHECK(fast.diameter == doctest::Approx(1.0));

    auto inst = build_lower_bound(4.0, 8.0, 1000, FeedbackMode::kFull, 3);
    CHECK(compute_fast_policy(inst.mdp).diameter == doctest::Approx(6.0).epsilon(1e-9));
}

TEST_CASE("fast policy: no proper policy diverges") {
    std::vector<std::vector<std::vector<Transition>>> rows(1);
    rows[0] = {{{0, 1.0}}};
    SspMdp mdp(0, std::move(rows));
    CHECK_THROWS_AS(compute_fast_policy(mdp), NoProperPolicyError);
}

TEST_CASE("best fixed policy: single proper policy and mean-law branch") {
    SspMdp mdp = geometric(0.5);
    CostFunction c{std::vector<double>(mdp.num_pairs(), 0.3)};
    auto best = best_fixed_policy(mdp, {c});
    CHECK(best.policy.actions()[0] == 0);
    CHECK(best.total_cost == doctest::Approx(0.6).epsilon(1e-9));

    auto inst = build_lower_bound(8.0, 32.0, 4096, FeedbackMode::kFull, 3);
    // Mean cost law: alpha on the good branch, alpha + eps elsewhere.
    CostFunction mean;
    mean.values.assign(inst.mdp.num_pairs(), 0.0);
    for (int j = 1; j <= inst.branches; ++j)
        mean.values[inst.branch_exit_pair(j)] =
            (j == inst.good_branch) ? inst.alpha : inst.alpha + inst.epsilon;
    mean.values[inst.fast_state_pair()] = 1.0;
    auto hindsight = best_fixed_policy(inst.mdp, {mean});
    CHECK(hindsight.policy.actions()[0] == inst.good_branch - 1);
    auto t = compute_hitting_times(inst.mdp, hindsight.policy);
    CHECK(t[0] == doctest::Approx(33.0).epsilon(1e-9));  // T* + 1
    CHECK(hindsight.total_cost == doctest::Approx(4.0).epsilon(1e-6));  // D/2
}

TEST_CASE("best fixed policy matches exhaustive enumeration") {
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        SspMdp mdp = oracles::random_mdp(3 + seed % 4, 3, seed);
        CostFunction mean = oracles::random_cost(mdp, seed * 13 + 1);
        auto planner = best_fixed_policy_for_average(mdp, mean, 10.0);
        auto oracle = oracles::enumerate_best_policy(mdp, mean, 10.0);
        REQUIRE(oracle.has_value());
        bool same_policy = planner.policy.actions() == oracle->actions;
        CHECK((same_policy || std::abs(planner.total_cost - oracle->total_cost) <= 1e-8));
    }
}

TEST_CASE("simulate: deterministic chain visits each pair once") {
    SspMdp mdp = chain3();
    CostFunction c{std::vector<double>(mdp.num_pairs(), 0.25)};
    Rng rng(1);
    EpisodeTrace tr =
        simulate_episode(mdp, make_stationary_executor(mdp, StationaryPolicy::uniform(mdp)), c, rng);
    CHECK(tr.steps == 3);
    CHECK(tr.truncated == false);
    for (int i = 0; i < mdp.num_pairs(); ++i) CHECK(tr.visits[i] == 1);
    CHECK(tr.incurred_cost == doctest::Approx(0.75));
}

TEST_CASE("simulate: geometric mean matches the hitting time") {
    SspMdp mdp = geometric(0.25);
    CostFunction c{std::vector<double>(mdp.num_pairs(), 1.0)};
    auto exec = make_stationary_executor(mdp, StationaryPolicy::uniform(mdp));
    Rng rng(42);
    oracles::MeanSe steps;
    for (int i = 0; i < 100000; ++i) steps.add(simulate_episode(mdp, exec, c, rng).steps);
    CHECK(std::abs(steps.mean - 4.0) <= 3.0 * steps.se());
}

TEST_CASE("simulate: hitting-time tail bound") {
    SspMdp mdp = geometric(0.25);
    CostFunction c{std::vector<double>(mdp.num_pairs(), 1.0)};
    auto exec = make_stationary_executor(mdp, StationaryPolicy::uniform(mdp));
    Rng rng(7);
    const double tau = 4.0;
    for (double mult : {4.0, 8.0, 16.0}) {
        double m = mult * tau;
        oracles::MeanSe tail;
        Rng local(rng.next_u64());
        for (int i = 0; i < 100000; ++i)
            tail.add(simulate_episode(mdp, exec, c, local).steps > m ? 1.0 : 0.0);
        CHECK(tail.mean <= 2.0 * std::exp(-m / (4.0 * tau)) + 4.0 * tail.se());
    }
}

TEST_CASE("occupancy identities: <q,c> = J and mass = T") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        SspMdp mdp = oracles::random_mdp(5, 3, seed * 3 + 1);
        StationaryPolicy pol = oracles::random_policy(mdp, seed * 5 + 2);
        CostFunction c = oracles::random_cost(mdp, seed * 7 + 3);
        OccupancyMeasure q = occupancy_of_policy(mdp, pol);
        auto j = compute_cost_to_go(mdp, pol, c);
        auto t = compute_hitting_times(mdp, pol);
        double qc = 0.0;
        for (int i = 0; i < mdp.num_pairs(); ++i) qc += q.values[i] * c.values[i];
        CHECK(qc == doctest::Approx(j[mdp.initial_state()]).epsilon(1e-8));
        CHECK(q.total_mass() == doctest::Approx(t[mdp.initial_state()]).epsilon(1e-8));
    }
}

TEST_CASE("episode cost second moment bounded by 2<q,J>") {
    SspMdp mdp = toy3_mdp();
    StationaryPolicy pol = oracles::random_policy(mdp, 11);
    CostFunction c = oracles::random_cost(mdp, 12, 0.1, 1.0);
    OccupancyMeasure q = occupancy_of_policy(mdp, pol);
    auto j = compute_cost_to_go(mdp, pol, c);
    double qj = 0.0;
    for (int s = 0; s < mdp.num_states(); ++s)
        for (int a = 0; a < mdp.num_actions(s); ++a)
            qj += q.values[mdp.pair_index(s, a)] * j[s];
    auto exec = make_stationary_executor(mdp, pol);
    Rng rng(99);
    oracles::MeanSe moment;
    for (int i = 0; i < 100000; ++i) {
        EpisodeTrace tr = simulate_episode(mdp, exec, c, rng);
        moment.add(tr.incurred_cost * tr.incurred_cost);
    }
    CHECK(moment.mean <= 2.0 * qj + 4.0 * moment.se());
}

TEST_CASE("diameter below the optimal policy's maximal hitting time") {
    SspMdp mdp = toy3_mdp();
    CostFunction c = oracles::random_cost(mdp, 5, 0.2, 1.0);  // c_min > 0
    auto best = best_fixed_policy(mdp, {c});
    auto t = compute_hitting_times(mdp, best.policy);
    double tmax = *std::max_element(t.begin(), t.end());
    double d = compute_fast_policy(mdp).diameter;
    CHECK(d <= tmax + 1e-9);
}

TEST_CASE("MDP JSON round trip") {
    SspMdp mdp = toy3_mdp();
    std::string text = mdp_to_json(mdp);
    SspMdp back = mdp_from_json(text);
    CHECK(back.num_states() == mdp.num_states());
    CHECK(back.num_pairs() == mdp.num_pairs());
    for (int s = 0; s < mdp.num_states(); ++s)
        for (int a = 0; a < mdp.num_actions(s); ++a) {
            REQUIRE(back.row(s, a).size() == mdp.row(s, a).size());
            for (std::size_t i = 0; i < mdp.row(s, a).size(); ++i)
                CHECK(back.row(s, a)[i].prob == doctest::Approx(mdp.row(s, a)[i].prob));
        }
    CHECK_THROWS_AS(mdp_from_json("{not json"), ParseError);
}
