#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "ssplab/harness.hpp"
#include "ssplab/json_io.hpp"

using nlohmann::json;
using namespace ssplab;

namespace {

json g_config;  // --config file contents; flags override these defaults

void diag(const std::string& type, const std::string& message) {
    json j;
    j["type"] = type;
    j["message"] = message;
    std::cerr << j.dump() << "\n";
}

template <typename T>
T cfg_or(const char* key, T fallback) {
    if (g_config.contains(key)) return g_config.at(key).get<T>();
    return fallback;
}

std::uint64_t default_seed() {
    if (const char* env = std::getenv("SSP_LAB_SEED")) return std::strtoull(env, nullptr, 10);
    return 0;
}

/// Adversary specs: constant[:v], alternating, random, file:PATH,
/// lowerbound:PATH (cost-law file emitted by the lowerbound subcommand).
AdversaryFactory make_adversary_factory(const SspMdp& mdp, const std::string& spec,
                                        std::uint64_t experiment_seed) {
    if (spec.rfind("constant", 0) == 0) {
        double v = 0.5;
        if (auto pos = spec.find(':'); pos != std::string::npos)
            v = std::stod(spec.substr(pos + 1));
        CostFunction c;
        c.values.assign(mdp.num_pairs(), v);
        return [c](std::uint64_t) { return make_constant_adversary(c); };
    }
    if (spec == "alternating") {
        // Two fixed random cost functions derived from the experiment seed.
        Rng rng(mix_seed(experiment_seed, 0xA17ull));
        std::vector<CostFunction> cs(2);
        for (auto& c : cs) {
            c.values.resize(mdp.num_pairs());
            for (auto& v : c.values) v = rng.uniform(0.05, 1.0);
        }
        return [cs](std::uint64_t) { return make_cyclic_adversary(cs); };
    }
    if (spec == "random") {
        const std::uint64_t s = mix_seed(experiment_seed, 0xADEull);
        const SspMdp* m = &mdp;
        return [m, s](std::uint64_t) { return make_random_adversary(*m, s); };
    }
    if (spec.rfind("file:", 0) == 0) {
        auto costs = load_costs(mdp, spec.substr(5));
        return [costs](std::uint64_t) { return make_cyclic_adversary(costs); };
    }
    if (spec.rfind("lowerbound:", 0) == 0) {
        json law = json::parse(read_file(spec.substr(11)), nullptr, false);
        if (law.is_discarded()) throw ParseError("malformed cost-law file");
        double D = law.at("D").get<double>();
        double tstar = law.at("Tstar").get<double>();
        int K = law.at("K").get<int>();
        int N = law.at("N").get<int>();
        FeedbackMode mode =
            law.at("mode").get<std::string>() == "bandit" ? FeedbackMode::kBandit
                                                          : FeedbackMode::kFull;
        std::uint64_t base = law.at("seed").get<std::uint64_t>();
        int pairs = mdp.num_pairs();
        return [=](std::uint64_t trial_seed) {
            LowerBoundInstance inst =
                build_lower_bound(D, tstar, K, mode, mix_seed(base, trial_seed), N);
            if (inst.mdp.num_pairs() != pairs)
                throw ParseError("cost-law file does not match the MDP file");
            return make_lower_bound_adversary(inst);
        };
    }
    throw ParseError("unknown adversary spec: " + spec);
}

int cmd_plan(const std::string& mdp_path) {
    SspMdp mdp = load_mdp(mdp_path);
    FastPolicyResult fast = compute_fast_policy(mdp);
    json out;
    out["states"] = mdp.num_states();
    out["pairs"] = mdp.num_pairs();
    out["avg_actions"] = static_cast<double>(mdp.num_pairs()) / mdp.num_states();
    out["diameter"] = fast.diameter;
    out["T_fast_initial"] = fast.hitting_times[mdp.initial_state()];
    json pol = json::object();
    auto actions = fast.policy.actions();
    for (int s = 0; s < mdp.num_states(); ++s)
        pol[mdp.state_name(s)] = mdp.action_name(s, actions[s]);
    out["fast_policy"] = pol;
    std::cout << out.dump(2) << "\n";
    return 0;
}

struct RunArgs {
    std::string mdp_path;
    std::string algo;
    int episodes = 0;
    double T = 0.0;
    int h1 = 0;
    double delta = 0.1;
    std::uint64_t seed = 0;
    int trials = 1;
    std::string adversary = "random";
    std::string out_dir = ".";
    int jobs = 1;
    int audit = 0;
    bool paper_gamma = false;
};

ExperimentConfig to_experiment_config(const RunArgs& a) {
    ExperimentConfig cfg;
    cfg.learner.algorithm = a.algo;
    cfg.learner.episodes = a.episodes;
    cfg.learner.hitting_bound = a.T;
    cfg.learner.h1 = a.h1;
    cfg.learner.delta = a.delta;
    cfg.learner.paper_gamma = a.paper_gamma;
    cfg.trials = a.trials;
    cfg.seed = a.seed;
    cfg.jobs = a.jobs;
    cfg.audit_points = a.audit;
    return cfg;
}

int cmd_run(const RunArgs& args) {
    if (args.algo != "adaptive" && args.T <= 0.0) {
        diag("usage", "--T is required for algorithm '" + args.algo + "'");
        return 1;
    }
    SspMdp mdp = load_mdp(args.mdp_path);
    ExperimentConfig cfg = to_experiment_config(args);
    AdversaryFactory adv = make_adversary_factory(mdp, args.adversary, args.seed);
    RegretReport report = run_experiment(mdp, cfg, adv);
    for (const auto& t : report.trials)
        if (t.failed) diag("trial-failure", "trial " + std::to_string(t.trial) + ": " + t.error);
    std::filesystem::create_directories(args.out_dir);
    write_file(args.out_dir + "/run.csv", report_to_csv(report));
    write_file(args.out_dir + "/summary.json", report_to_json(cfg, report));
    std::cout << "mean_regret " << report.mean_regret << " (std " << report.std_regret << ")\n";
    // Propagate solver failures recorded inside trials as exit code 4.
    for (const auto& t : report.trials)
        if (t.failed) return 4;
    return 0;
}

int cmd_sweep(const RunArgs& args, const std::string& algos_csv, const std::string& grid_csv) {
    SspMdp mdp = load_mdp(args.mdp_path);
    std::vector<std::string> algos;
    for (std::size_t pos = 0; pos < algos_csv.size();) {
        auto next = algos_csv.find(',', pos);
        if (next == std::string::npos) next = algos_csv.size();
        algos.push_back(algos_csv.substr(pos, next - pos));
        pos = next + 1;
    }
    std::vector<int> grid;
    for (std::size_t pos = 0; pos < grid_csv.size();) {
        auto next = grid_csv.find(',', pos);
        if (next == std::string::npos) next = grid_csv.size();
        grid.push_back(std::stoi(grid_csv.substr(pos, next - pos)));
        pos = next + 1;
    }
    for (const auto& a : algos)
        if (a != "adaptive" && args.T <= 0.0) {
            diag("usage", "--T is required for algorithm '" + a + "'");
            return 1;
        }
    ExperimentConfig cfg = to_experiment_config(args);
    AdversaryFactory adv = make_adversary_factory(mdp, args.adversary, args.seed);
    SweepResult res = sweep(mdp, cfg, algos, grid, adv);
    std::filesystem::create_directories(args.out_dir);
    write_file(args.out_dir + "/sweep.json", sweep_to_json(res));
    for (const auto& cell : res.cells)
        write_file(args.out_dir + "/cell_" + cell.algorithm + "_" +
                       std::to_string(cell.episodes) + ".csv",
                   report_to_csv(cell.report));
    std::cout << sweep_to_json(res) << "\n";
    return 0;
}

int cmd_lowerbound(double D, double tstar, int K, const std::string& mode_str,
                   std::uint64_t seed, int branches, const std::string& out_dir) {
    FeedbackMode mode = mode_str == "bandit" ? FeedbackMode::kBandit : FeedbackMode::kFull;
    LowerBoundInstance inst = build_lower_bound(D, tstar, K, mode, seed, branches);
    std::filesystem::create_directories(out_dir);
    save_mdp(inst.mdp, out_dir + "/instance.json");
    json law;
    law["type"] = "lowerbound";
    law["D"] = D;
    law["Tstar"] = tstar;
    law["K"] = K;
    law["N"] = inst.branches;
    law["mode"] = mode_str;
    law["seed"] = seed;
    law["alpha"] = inst.alpha;
    law["epsilon"] = inst.epsilon;
    law["good_branch"] = inst.good_branch;
    write_file(out_dir + "/costlaw.json", law.dump(2));
    std::cout << law.dump(2) << "\n";
    return 0;
}

int cmd_validate(const std::string& mdp_path, int samples, std::uint64_t seed) {
    if (samples < 100000)
        diag("low-power",
             "sample count " + std::to_string(samples) +
                 " is below 100000; 4-sigma margins may be unreliable");
    SspMdp mdp = mdp_path.empty() ? toy3_mdp() : load_mdp(mdp_path, /*lenient=*/true);
    auto ledger = property_suite(mdp, samples, seed);
    std::cout << property_ledger_to_json(ledger) << "\n";
    for (const auto& c : ledger)
        if (!c.pass) {
            diag("validation-failure", c.name);
            return 5;
        }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Online learning for stochastic shortest path with adversarial costs"};
    app.require_subcommand(1);

    // Pre-scan for --config so file values become flag defaults.
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--config") {
            try {
                g_config = json::parse(read_file(argv[i + 1]));
            } catch (const std::exception& e) {
                diag("parse-error", e.what());
                return 2;
            }
        }
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file; flags override its values");

    auto* plan = app.add_subcommand("plan", "Print planning quantities of an MDP file");
    std::string plan_mdp;
    plan->add_option("--mdp", plan_mdp, "MDP JSON file")->required();

    RunArgs run_args;
    run_args.seed = cfg_or<std::uint64_t>("seed", default_seed());
    run_args.algo = cfg_or<std::string>("algo", "");
    run_args.episodes = cfg_or<int>("K", 0);
    run_args.T = cfg_or<double>("T", 0.0);
    run_args.h1 = cfg_or<int>("H1", 0);
    run_args.delta = cfg_or<double>("delta", 0.1);
    run_args.trials = cfg_or<int>("trials", 1);
    run_args.adversary = cfg_or<std::string>("adversary", "random");
    run_args.out_dir = cfg_or<std::string>("out", ".");
    run_args.jobs = cfg_or<int>("jobs", 1);
    run_args.audit = cfg_or<int>("audit", 0);

    auto add_run_flags = [&](CLI::App* cmd, bool require_core) {
        auto* mdp_opt = cmd->add_option("--mdp", run_args.mdp_path, "MDP JSON file");
        auto* algo_opt = cmd->add_option(
            "--algo", run_args.algo, "oreps | adaptive | skewed | bandit | bandit-hp");
        auto* k_opt = cmd->add_option("--K", run_args.episodes, "number of episodes");
        if (require_core) {
            mdp_opt->required();
            if (run_args.algo.empty()) algo_opt->required();
            if (run_args.episodes == 0) k_opt->required();
        } else {
            mdp_opt->required();
        }
        cmd->add_option("--T", run_args.T, "hitting-time upper bound (not needed by adaptive)");
        cmd->add_option("--H1", run_args.h1, "layered horizon (default ceil(K^(1/3)))");
        cmd->add_option("--delta", run_args.delta, "confidence level");
        cmd->add_option("--seed", run_args.seed, "root seed (default env SSP_LAB_SEED)");
        cmd->add_option("--trials", run_args.trials, "independent trials");
        cmd->add_option("--adversary", run_args.adversary,
                        "constant[:v] | alternating | random | file:PATH | lowerbound:PATH");
        cmd->add_option("--out", run_args.out_dir, "output directory");
        cmd->add_option("--jobs", run_args.jobs, "parallel trial workers");
        cmd->add_option("--audit", run_args.audit,
                        "audit every OMD step against this many random feasible points");
        cmd->add_flag("--paper-gamma", run_args.paper_gamma,
                      "keep the asymptotic bias coefficient in bandit-hp");
    };

    auto* run = app.add_subcommand("run", "Run one experiment and write CSV + JSON summary");
    add_run_flags(run, true);

    auto* swp = app.add_subcommand("sweep", "Grid over algorithms and episode counts");
    std::string algos_csv = cfg_or<std::string>("algos", "oreps");
    std::string grid_csv = cfg_or<std::string>("K_grid", "1024,4096");
    add_run_flags(swp, false);
    swp->add_option("--algos", algos_csv, "comma-separated algorithm ids");
    swp->add_option("--K-grid", grid_csv, "comma-separated episode counts");

    auto* lb = app.add_subcommand("lowerbound", "Emit a stochastic lower-bound instance");
    double lb_D = cfg_or<double>("D", 0.0);
    double lb_T = cfg_or<double>("Tstar", 0.0);
    int lb_K = cfg_or<int>("K", 0);
    std::string lb_mode = cfg_or<std::string>("mode", "full");
    std::uint64_t lb_seed = cfg_or<std::uint64_t>("seed", default_seed());
    int lb_N = cfg_or<int>("N", 2);
    std::string lb_out = cfg_or<std::string>("out", ".");
    lb->add_option("--D", lb_D, "diameter parameter")->required();
    lb->add_option("--Tstar", lb_T, "optimal hitting-time parameter")->required();
    lb->add_option("--K", lb_K, "episode count")->required();
    lb->add_option("--mode", lb_mode, "full | bandit");
    lb->add_option("--seed", lb_seed, "instance seed");
    lb->add_option("--N", lb_N, "branch count (bandit state count = N + 2)");
    lb->add_option("--out", lb_out, "output directory");

    auto* val = app.add_subcommand("validate", "Run the Monte-Carlo property suite");
    std::string val_mdp = cfg_or<std::string>("mdp", "");
    int val_samples = cfg_or<int>("samples", 100000);
    std::uint64_t val_seed = cfg_or<std::uint64_t>("seed", default_seed());
    val->add_option("--mdp", val_mdp, "MDP JSON file (defaults to the built-in toy)");
    val->add_option("--samples", val_samples, "Monte-Carlo sample count");
    val->add_option("--seed", val_seed, "root seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*plan) return cmd_plan(plan_mdp);
        if (*run) return cmd_run(run_args);
        if (*swp) return cmd_sweep(run_args, algos_csv, grid_csv);
        if (*lb) return cmd_lowerbound(lb_D, lb_T, lb_K, lb_mode, lb_seed, lb_N, lb_out);
        if (*val) return cmd_validate(val_mdp, val_samples, val_seed);
    } catch (const ParseError& e) {
        diag("parse-error", e.what());
        return 2;
    } catch (const NoProperPolicyError& e) {
        diag("no-proper-policy", e.what());
        return 3;
    } catch (const ImproperPolicyError& e) {
        diag("improper-policy", e.what());
        return 3;
    } catch (const SolverFailureError& e) {
        diag("solver-failure", e.what());
        return 4;
    } catch (const InfeasibleFloorError& e) {
        diag("infeasible-floor", e.what());
        return 4;
    } catch (const ParameterViolationError& e) {
        diag("parameter-violation", e.what());
        return 1;
    } catch (const std::exception& e) {
        diag("error", e.what());
        return 4;
    }
    return 0;
}
