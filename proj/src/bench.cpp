#include "cvrp/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "cvrp/exact.hpp"
#include "cvrp/heuristics.hpp"
#include "cvrp/policy/rollout.hpp"
#include "cvrp/policy/weights.hpp"
#include "json.hpp"

namespace cvrp::bench {

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open file: " + path);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

std::string fmt1(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.1f", x);
    return buf;
}

std::string time_cell(double seconds, bool limit_hit) {
    std::string s = fmt1(seconds);
    if (limit_hit) {
        if (s.size() > 2 && s.compare(s.size() - 2, 2, ".0") == 0) s.resize(s.size() - 2);
        s += "*";
    }
    return s;
}

}  // namespace

std::optional<double> Registry::optimum(const std::string& instance) const {
    auto it = optima.find(instance);
    if (it == optima.end()) return std::nullopt;
    return it->second;
}

Registry parse_registry(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("invalid registry JSON: ") + e.what());
    }
    Registry reg;
    const nlohmann::json optima = j.value("optima", nlohmann::json::object());
    const nlohmann::json published = j.value("published", nlohmann::json::array());
    for (const auto& [name, value] : optima.items()) reg.optima[name] = value.get<double>();
    for (const auto& row : published) {
        Registry::Published p;
        p.solver = row.at("solver").get<std::string>();
        p.instance = row.at("instance").get<std::string>();
        p.mean = row.at("mean").get<double>();
        p.gap_percent = row.at("gap_percent").get<double>();
        p.time_s = row.at("time_s").get<double>();
        p.limit_hit = row.value("limit_hit", false);
        p.consistent = row.value("consistent", true);
        reg.published.push_back(std::move(p));
    }
    return reg;
}

Registry load_registry(const std::string& path) { return parse_registry(read_file(path)); }

ResultRow run_benchmark(const BenchmarkRun& run, const Registry& registry) {
    if (run.repetitions < 1) throw ConfigError("repetitions must be >= 1");
    if (run.budget_s <= 0.0) throw ConfigError("time budget must be positive");

    Instance inst = parse_cvrplib(read_file(run.instance_path));
    ResultRow row;
    row.solver = run.solver;
    row.instance = inst.name;
    row.budget_s = run.budget_s;

    // Returns (solution, limit_hit). Weight loading happens outside the timed
    // region: reported time is solve/prediction time only.
    std::function<std::pair<Solution, bool>(std::uint64_t)> solve;
    if (run.solver == "exact") {
        solve = [&](std::uint64_t) {
            exact::MilpModel model = exact::build_mtz_model(inst);
            exact::BnbOptions opts;
            opts.time_limit_s = run.budget_s;
            opts.incumbent_seed = heur::clarke_wright(inst);
            exact::BnbResult res = exact::solve_branch_and_bound(model, inst, opts);
            if (res.status == exact::BnbStatus::TimeLimitNone)
                throw std::runtime_error("no feasible solution within the budget");
            return std::make_pair(res.solution, res.status != exact::BnbStatus::Optimal);
        };
    } else if (run.solver == "savings") {
        solve = [&](std::uint64_t) { return std::make_pair(heur::clarke_wright(inst), false); };
    } else if (run.solver == "gls") {
        solve = [&](std::uint64_t seed) {
            heur::GlsOptions opts;
            opts.budget_s = run.budget_s;
            opts.seed = seed;
            return std::make_pair(heur::guided_local_search(inst, opts), true);
        };
    } else if (run.solver == "rl-greedy" || run.solver == "rl-sample" ||
               run.solver == "rl-beam") {
        if (run.weights_path.empty())
            throw ConfigError("solver '" + run.solver + "' needs a weights file");
        auto params = std::make_shared<policy::PolicyParams>(
            policy::load_weights(run.weights_path));
        solve = [&, params](std::uint64_t seed) {
            policy::RolloutOptions opts;
            if (run.solver == "rl-sample") {
                opts.mode = policy::DecodeMode::Sample;
                opts.seed = seed;
            } else if (run.solver == "rl-beam") {
                opts.mode = policy::DecodeMode::Beam;
                opts.beam_width = run.beam_width;
            }
            return std::make_pair(policy::rollout(*params, inst, opts).solution, false);
        };
    } else {
        throw ConfigError("unknown solver id: " + run.solver);
    }

    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < run.repetitions; ++i) {
        try {
            auto t0 = std::chrono::steady_clock::now();
            auto [sol, hit] = solve(run.seed_base + static_cast<std::uint64_t>(i));
            double secs =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            row.run_costs.push_back(sol.cost);
            row.run_times.push_back(secs);
            row.limit_hit = row.limit_hit || hit;
            if (sol.cost < best) {
                best = sol.cost;
                row.best_solution = sol;
            }
        } catch (const std::exception&) {
            row.failed = true;
            return row;
        }
    }
    for (double c : row.run_costs) row.mean_cost += c;
    row.mean_cost /= static_cast<double>(row.run_costs.size());
    for (double t : row.run_times) row.mean_time_s += t;
    row.mean_time_s /= static_cast<double>(row.run_times.size());
    if (auto opt = registry.optimum(row.instance)) {
        row.has_gap = true;
        row.gap_fraction = gap(row.mean_cost, *opt);
    }
    return row;
}

std::string emit_table_markdown(const std::vector<ResultRow>& rows) {
    std::vector<std::string> solvers, instances;
    for (const ResultRow& r : rows) {
        if (std::find(solvers.begin(), solvers.end(), r.solver) == solvers.end())
            solvers.push_back(r.solver);
        if (std::find(instances.begin(), instances.end(), r.instance) == instances.end())
            instances.push_back(r.instance);
    }
    auto find_row = [&](const std::string& s, const std::string& i) -> const ResultRow* {
        for (const ResultRow& r : rows)
            if (r.solver == s && r.instance == i) return &r;
        return nullptr;
    };

    std::ostringstream out;
    out << "| Solver |";
    for (const std::string& inst : instances)
        out << " " << inst << " Mean | Gap (%) | Time (s) |";
    out << "\n|---|";
    for (size_t i = 0; i < instances.size(); ++i) out << "---|---|---|";
    out << "\n";
    for (const std::string& s : solvers) {
        out << "| " << s << " |";
        for (const std::string& inst : instances) {
            const ResultRow* r = find_row(s, inst);
            if (!r) {
                out << "  |  |  |";
            } else if (r->failed) {
                out << " failed | ? | ? |";
            } else {
                out << " " << fmt1(r->mean_cost) << " | "
                    << (r->has_gap ? fmt1(100.0 * r->gap_fraction) : std::string("?"))
                    << " | "
                    << time_cell(r->limit_hit ? r->budget_s : r->mean_time_s, r->limit_hit)
                    << " |";
            }
        }
        out << "\n";
    }
    return out.str();
}

std::string emit_table_csv(const std::vector<ResultRow>& rows) {
    std::ostringstream out;
    out << "solver,instance,mean_cost,gap_fraction,mean_time_s,limit_hit,failed\n";
    char buf[256];
    for (const ResultRow& r : rows) {
        std::snprintf(buf, sizeof buf, "%.17g", r.mean_cost);
        out << r.solver << "," << r.instance << "," << (r.failed ? "" : buf) << ",";
        if (r.has_gap && !r.failed) {
            std::snprintf(buf, sizeof buf, "%.17g", r.gap_fraction);
            out << buf;
        }
        // Wall time is the one nondeterministic column; table rounding keeps
        // repeated runs byte-comparable.
        out << "," << fmt1(r.mean_time_s) << "," << (r.limit_hit ? 1 : 0) << ","
            << (r.failed ? 1 : 0) << "\n";
    }
    return out.str();
}

std::string emit_curves(const std::vector<NamedCurve>& curves) {
    if (curves.empty()) throw ConfigError("emit_curves needs at least one curve");
    struct Series {
        std::vector<int> epochs;
        std::vector<double> values;
    };
    std::vector<Series> series(curves.size());
    for (size_t c = 0; c < curves.size(); ++c) {
        std::map<int, std::pair<double, int>> acc;  // epoch -> (sum, count)
        for (const policy::CurveRow& r : curves[c].rows) {
            acc[r.epoch].first += r.mean_cost;
            acc[r.epoch].second += 1;
        }
        if (acc.empty()) throw ConfigError("curve '" + curves[c].label + "' is empty");
        for (auto& [epoch, sc] : acc) {
            series[c].epochs.push_back(epoch);
            series[c].values.push_back(sc.first / sc.second);
        }
    }
    // Coarsest grid wins; other curves contribute their nearest epoch (ties
    // toward the smaller epoch).
    size_t target = 0;
    for (size_t c = 1; c < series.size(); ++c)
        if (series[c].epochs.size() < series[target].epochs.size()) target = c;

    auto nearest = [](const Series& s, int epoch) {
        size_t best = 0;
        for (size_t i = 1; i < s.epochs.size(); ++i)
            if (std::abs(s.epochs[i] - epoch) < std::abs(s.epochs[best] - epoch)) best = i;
        return s.values[best];
    };

    std::ostringstream out;
    out << "epoch";
    for (const NamedCurve& c : curves) out << "," << c.label;
    if (curves.size() == 2) out << ",diff";
    out << "\n";
    char buf[64];
    for (size_t i = 0; i < series[target].epochs.size(); ++i) {
        int epoch = series[target].epochs[i];
        out << epoch;
        std::vector<double> vals;
        for (const Series& s : series) vals.push_back(nearest(s, epoch));
        for (double v : vals) {
            std::snprintf(buf, sizeof buf, "%.6f", v);
            out << "," << buf;
        }
        if (vals.size() == 2) {
            std::snprintf(buf, sizeof buf, "%.6f", vals[0] - vals[1]);
            out << "," << buf;
        }
        out << "\n";
    }
    return out.str();
}

std::vector<ResultRow> run_bench_config(const std::string& config_path, std::ostream& log) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(config_path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("invalid benchmark config JSON: ") + e.what());
    }
    Registry registry;
    if (j.contains("registry")) registry = load_registry(j["registry"].get<std::string>());
    std::string output_dir = j.value("output_dir", std::string("bench_out"));
    int repetitions = j.value("repetitions", 10);
    double budget_s = j.value("budget_s", 60.0);
    std::uint64_t seed_base = j.value("seed_base", std::uint64_t{1});
    std::string weights = j.value("weights", std::string());
    int beam_width = j.value("beam_width", 5);
    bool include_published = j.value("include_published", false);
    if (!j.contains("instances") || !j.contains("solvers"))
        throw ConfigError("benchmark config needs \"instances\" and \"solvers\" lists");

    std::vector<ResultRow> rows;
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(output_dir) / "solutions");

    for (const auto& inst_path : j["instances"]) {
        for (const auto& solver : j["solvers"]) {
            BenchmarkRun run;
            run.instance_path = inst_path.get<std::string>();
            run.solver = solver.get<std::string>();
            run.repetitions = repetitions;
            run.budget_s = budget_s;
            run.seed_base = seed_base;
            run.weights_path = weights;
            run.beam_width = beam_width;
            log << "running " << run.solver << " on " << run.instance_path << " ("
                << repetitions << " reps, " << budget_s << " s budget)\n";
            ResultRow row = run_benchmark(run, registry);
            if (row.failed) {
                log << "  FAILED\n";
            } else {
                log << "  mean cost " << row.mean_cost << ", mean time " << row.mean_time_s
                    << " s\n";
                std::ofstream sol(fs::path(output_dir) / "solutions" /
                                  (row.instance + "-" + row.solver + ".sol"));
                sol << serialize_solution(row.best_solution);
            }
            rows.push_back(std::move(row));
        }
    }
    if (include_published) {
        for (const Registry::Published& p : registry.published) {
            ResultRow row;
            row.solver = p.solver;
            row.instance = p.instance;
            row.mean_cost = p.mean;
            row.mean_time_s = p.time_s;
            row.limit_hit = p.limit_hit;
            row.budget_s = p.time_s;
            // Published rows keep their printed gap verbatim; recomputation
            // against the optimum is a separate consistency check.
            row.has_gap = true;
            row.gap_fraction = p.gap_percent / 100.0;
            rows.push_back(std::move(row));
        }
    }

    std::ofstream csv(std::filesystem::path(output_dir) / "results.csv");
    csv << emit_table_csv(rows);
    std::ofstream md(std::filesystem::path(output_dir) / "results.md");
    md << emit_table_markdown(rows);
    log << "wrote " << output_dir << "/results.csv and results.md\n";
    return rows;
}

}  // namespace cvrp::bench
