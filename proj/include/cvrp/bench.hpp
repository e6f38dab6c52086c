#ifndef CVRP_BENCH_HPP
#define CVRP_BENCH_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cvrp/instance.hpp"
#include "cvrp/policy/train.hpp"

namespace cvrp::bench {

class ConfigError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Known optima plus externally published comparison rows, shipped as a JSON
// data file so gap columns have ground truth.
struct Registry {
    struct Published {
        std::string solver;
        std::string instance;
        double mean = 0.0;
        double gap_percent = 0.0;
        double time_s = 0.0;
        bool limit_hit = false;
        // False when the printed gap disagrees with gap(mean, optimum).
        bool consistent = true;
    };
    std::map<std::string, double> optima;
    std::vector<Published> published;

    std::optional<double> optimum(const std::string& instance) const;
};

Registry parse_registry(const std::string& json_text);
Registry load_registry(const std::string& path);

struct BenchmarkRun {
    std::string instance_path;
    std::string solver;  // exact | savings | gls | rl-greedy | rl-sample | rl-beam
    int repetitions = 10;
    double budget_s = 60.0;
    std::uint64_t seed_base = 1;
    std::string weights_path;  // rl-* solvers
    int beam_width = 5;
};

struct ResultRow {
    std::string solver;
    std::string instance;
    double mean_cost = 0.0;
    double mean_time_s = 0.0;
    bool has_gap = false;
    double gap_fraction = 0.0;
    bool limit_hit = false;
    bool failed = false;
    double budget_s = 0.0;
    std::vector<double> run_costs;
    std::vector<double> run_times;
    Solution best_solution;
};

// Runs the solver `repetitions` times with seeds seed_base+i, timing only the
// solve call. Unknown solver ids throw ConfigError; a solver that throws
// mid-run yields a row with failed=true.
ResultRow run_benchmark(const BenchmarkRun& run, const Registry& registry);

// One table row per solver, one Mean / Gap (%) / Time (s) column group per
// instance. Costs and gaps use one decimal; a time cell that hit the limit
// drops its trailing ".0" and gains an asterisk; unknown gaps render "?".
std::string emit_table_markdown(const std::vector<ResultRow>& rows);
// Same data, unrounded, one line per (solver, instance).
std::string emit_table_csv(const std::vector<ResultRow>& rows);

struct NamedCurve {
    std::string label;
    std::vector<policy::CurveRow> rows;
};

// Epoch-aligned wide CSV of per-epoch mean costs. Curves on a finer epoch
// grid are resampled to the coarsest grid by nearest epoch (ties toward the
// smaller epoch). With exactly two curves a difference column is appended.
std::string emit_curves(const std::vector<NamedCurve>& curves);

// Full config-driven run: parses the JSON config, executes the solver matrix
// and writes results.csv / results.md / solutions/*.sol under output_dir.
// Returns the emitted rows.
std::vector<ResultRow> run_bench_config(const std::string& config_path, std::ostream& log);

}  // namespace cvrp::bench

#endif
