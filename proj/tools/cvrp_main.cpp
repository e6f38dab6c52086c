#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "cvrp/bench.hpp"
#include "cvrp/exact.hpp"
#include "cvrp/heuristics.hpp"
#include "cvrp/instance.hpp"
#include "cvrp/policy/rollout.hpp"
#include "cvrp/policy/train.hpp"
#include "cvrp/policy/weights.hpp"

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

int cmd_solve(const std::string& file, const std::string& solver, double time_limit,
              std::uint64_t seed, const std::string& weights, int beam) {
    cvrp::Instance inst = cvrp::parse_cvrplib(read_file(file));
    cvrp::Solution sol;
    bool limit_hit = false;
    if (solver == "exact") {
        cvrp::exact::MilpModel model = cvrp::exact::build_mtz_model(inst);
        cvrp::exact::BnbOptions opts;
        opts.time_limit_s = time_limit;
        opts.incumbent_seed = cvrp::heur::clarke_wright(inst);
        cvrp::exact::BnbResult res = cvrp::exact::solve_branch_and_bound(model, inst, opts);
        if (res.status == cvrp::exact::BnbStatus::TimeLimitNone) {
            std::cerr << "no feasible solution within the time limit\n";
            return 1;
        }
        sol = res.solution;
        limit_hit = res.status != cvrp::exact::BnbStatus::Optimal;
        std::cerr << "nodes " << res.nodes << ", lower bound " << res.lower_bound
                  << (limit_hit ? " (time limit hit)" : " (proved optimal)") << "\n";
    } else if (solver == "savings") {
        sol = cvrp::heur::clarke_wright(inst);
    } else if (solver == "gls") {
        cvrp::heur::GlsOptions opts;
        opts.budget_s = time_limit;
        opts.seed = seed;
        sol = cvrp::heur::guided_local_search(inst, opts);
    } else if (solver == "rl") {
        if (weights.empty()) {
            std::cerr << "--solver rl needs --weights\n";
            return 1;
        }
        cvrp::policy::PolicyParams params = cvrp::policy::load_weights(weights);
        cvrp::policy::RolloutOptions opts;
        if (beam > 1) {
            opts.mode = cvrp::policy::DecodeMode::Beam;
            opts.beam_width = beam;
        }
        sol = cvrp::policy::rollout(params, inst, opts).solution;
    } else {
        std::cerr << "unknown solver: " << solver << "\n";
        return 1;
    }
    cvrp::FeasibilityReport report = cvrp::validate(inst, sol);
    if (!report.feasible()) {
        std::cerr << "solver returned an infeasible solution\n";
        return 1;
    }
    std::cout << cvrp::serialize_solution(sol);
    if (limit_hit) std::cerr << "time limit " << time_limit << " s hit\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CVRP solver suite: exact, heuristic and learned solvers plus a benchmark harness"};
    app.require_subcommand(1);

    auto* solve = app.add_subcommand("solve", "Solve one CVRPLib instance");
    std::string solve_file, solve_solver = "gls", solve_weights;
    double solve_limit = 60.0;
    std::uint64_t solve_seed = 0;
    int solve_beam = 1;
    solve->add_option("file", solve_file, "CVRPLib instance file")->required();
    solve->add_option("--solver", solve_solver, "exact | savings | gls | rl");
    solve->add_option("--time-limit", solve_limit, "wall-clock budget in seconds");
    solve->add_option("--seed", solve_seed, "random seed");
    solve->add_option("--weights", solve_weights, "policy weight file (rl)");
    solve->add_option("--beam", solve_beam, "beam width (rl; 1 = greedy)");

    auto* bench = app.add_subcommand("bench", "Run a benchmark config");
    std::string bench_config;
    bench->add_option("--config", bench_config, "benchmark config JSON")->required();

    auto* train = app.add_subcommand("train", "Train the neural policy");
    std::string train_config, train_overfit, train_reuse, train_out = "weights.bin",
                train_curve = "curve.csv";
    train->add_option("--config", train_config, "training config JSON");
    train->add_option("--overfit", train_overfit, "train on this single instance file");
    train->add_option("--reuse", train_reuse, "warm-start from these weights (transfer)");
    train->add_option("--out", train_out, "output weight file");
    train->add_option("--curve", train_curve, "output training curve CSV");

    auto* export_lp = app.add_subcommand("export-lp", "Write the MILP model in LP format");
    std::string lp_file, lp_out;
    export_lp->add_option("file", lp_file, "CVRPLib instance file")->required();
    export_lp->add_option("-o,--output", lp_out, "output path (default: stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (solve->parsed())
            return cmd_solve(solve_file, solve_solver, solve_limit, solve_seed, solve_weights,
                             solve_beam);
        if (bench->parsed()) {
            cvrp::bench::run_bench_config(bench_config, std::cerr);
            return 0;
        }
        if (train->parsed()) {
            cvrp::policy::TrainConfig cfg =
                train_config.empty()
                    ? cvrp::policy::TrainConfig{}
                    : cvrp::policy::train_config_from_json(read_file(train_config));
            std::optional<cvrp::Instance> fixed;
            if (!train_overfit.empty())
                fixed = cvrp::parse_cvrplib(read_file(train_overfit));
            std::optional<cvrp::policy::PolicyParams> initial;
            if (!train_reuse.empty()) {
                cvrp::policy::PolicyParams source = cvrp::policy::load_weights(train_reuse);
                initial = source.config.problem == cfg.model.problem &&
                                  source.config.encoder_layers == cfg.model.encoder_layers
                              ? source
                              : cvrp::policy::transfer_init(source, cfg.model, cfg.seed);
            }
            cvrp::policy::TrainResult result = cvrp::policy::train_reinforce(
                cfg, initial ? &*initial : nullptr, fixed ? &*fixed : nullptr,
                [](const cvrp::policy::CurveRow& r) {
                    std::cerr << "epoch " << r.epoch << " batch " << r.batch << " mean cost "
                              << r.mean_cost << " baseline " << r.baseline_cost << "\n";
                });
            cvrp::policy::save_weights(train_out, result.params);
            cvrp::policy::save_sidecar(train_out, cvrp::policy::train_config_to_json(cfg));
            std::ofstream curve(train_curve);
            curve << cvrp::policy::curve_csv(result.curve);
            std::cerr << "held-out mean cost: untrained " << result.untrained_heldout_mean
                      << ", final "
                      << (result.heldout_mean.empty() ? result.untrained_heldout_mean
                                                      : result.heldout_mean.back())
                      << "\n";
            return 0;
        }
        if (export_lp->parsed()) {
            cvrp::Instance inst = cvrp::parse_cvrplib(read_file(lp_file));
            std::string lp = cvrp::exact::export_lp(cvrp::exact::build_mtz_model(inst));
            if (lp_out.empty()) {
                std::cout << lp;
            } else {
                std::ofstream out(lp_out);
                out << lp;
            }
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
