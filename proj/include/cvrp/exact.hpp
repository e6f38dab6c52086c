#ifndef CVRP_EXACT_HPP
#define CVRP_EXACT_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cvrp/instance.hpp"
#include "cvrp/simplex.hpp"

namespace cvrp::exact {

// Two-index MTZ model: binary edge variables e_ij for every ordered pair
// i != j over nodes 0..n, continuous-relaxable load variables u_i for
// customers. Variable order: all edges (i-major, j-minor), then u_1..u_n.
struct MilpModel {
    int n = 0;  // customers
    std::vector<double> obj;
    std::vector<double> lb, ub;
    std::vector<bool> is_binary;
    std::vector<lp::Row> rows;
    std::vector<int> edge_index;  // (n+1)^2 lookup, -1 on the diagonal

    int num_vars() const { return static_cast<int>(obj.size()); }
    int num_edge_vars() const { return n * (n + 1); }
    int edge_var(int i, int j) const { return edge_index[i * (n + 1) + j]; }
    int load_var(int i) const { return num_edge_vars() + i - 1; }
    // Inverse of edge_var.
    std::pair<int, int> edge_of(int var) const;
};

MilpModel build_mtz_model(const Instance& inst);

// CPLEX LP text format: Minimize / Subject To / Bounds / Binary / General / End.
std::string export_lp(const MilpModel& model);

enum class BnbStatus { Optimal, TimeLimitFeasible, TimeLimitNone };

struct BnbOptions {
    double time_limit_s = lp::kInf;
    std::optional<Solution> incumbent_seed;
    // Called every 1000 nodes with (nodes, incumbent cost or +inf, best bound).
    std::function<void(long, double, double)> trace;
};

struct BnbResult {
    BnbStatus status = BnbStatus::TimeLimitNone;
    Solution solution;       // meaningful unless status == TimeLimitNone
    double lower_bound = 0.0;
    double root_lp_bound = 0.0;
    long nodes = 0;
};

BnbResult solve_branch_and_bound(const MilpModel& model, const Instance& inst,
                                 const BnbOptions& opts = {});

// Exhaustive oracle over all capacity-feasible route partitions (n <= 9).
// Deterministic tie-break: canonical route orientation, routes ordered by
// first customer, lexicographically smallest choice among equal-cost optima.
Solution brute_force_optimal(const Instance& inst);

// Extracts depot-anchored cycles from an integral edge assignment.
std::vector<Route> routes_from_edges(const MilpModel& model, const std::vector<double>& x);

}  // namespace cvrp::exact

#endif
