#include <algorithm>
#include <chrono>
#include <cmath>
#include <queue>

#include "cvrp/exact.hpp"

namespace cvrp::exact {

namespace {

constexpr double kIntTol = 1e-6;
constexpr double kPruneTol = 1e-9;

struct Node {
    std::vector<std::pair<int, double>> fixings;  // (edge var, 0 or 1)
    double bound;  // parent LP bound, refined after solving
    int depth;
    long id;
};

struct NodeOrder {
    bool operator()(const Node& a, const Node& b) const {
        if (a.bound != b.bound) return a.bound > b.bound;  // min-heap on bound
        if (a.depth != b.depth) return a.depth < b.depth;
        return a.id > b.id;
    }
};

}  // namespace

BnbResult solve_branch_and_bound(const MilpModel& model, const Instance& inst,
                                 const BnbOptions& opts) {
    using Clock = std::chrono::steady_clock;
    const auto start = Clock::now();
    auto elapsed = [&] {
        return std::chrono::duration<double>(Clock::now() - start).count();
    };

    lp::Problem base;
    base.obj = model.obj;
    base.lb = model.lb;
    base.ub = model.ub;
    base.rows = model.rows;

    DistanceMatrix dist(inst);

    BnbResult res;
    double incumbent_cost = lp::kInf;
    bool have_incumbent = false;
    if (opts.incumbent_seed) {
        res.solution = *opts.incumbent_seed;
        res.solution.cost = solution_cost(dist, res.solution.routes);
        incumbent_cost = res.solution.cost;
        have_incumbent = true;
    }

    std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
    long next_id = 0;
    open.push({{}, -lp::kInf, 0, next_id++});
    bool have_dive = false;
    Node dive;
    bool root_done = false;
    bool exhausted = true;

    lp::Problem work = base;
    while (have_dive || !open.empty()) {
        if (elapsed() > opts.time_limit_s) {
            exhausted = false;
            break;
        }
        Node node;
        if (have_dive) {
            node = std::move(dive);
            have_dive = false;
        } else {
            node = open.top();
            open.pop();
        }
        if (node.bound >= incumbent_cost - kPruneTol) continue;

        work.lb = base.lb;
        work.ub = base.ub;
        for (auto [v, val] : node.fixings) {
            work.lb[v] = val;
            work.ub[v] = val;
        }
        lp::Result rel = lp::solve(work, 1e-7, 0,
                                   [&] { return elapsed() > opts.time_limit_s; });
        ++res.nodes;
        if (rel.status == lp::Status::IterLimit) {
            exhausted = false;
            // Re-queue so the node's bound still counts toward the reported
            // lower bound before the loop exits on the time check.
            open.push(std::move(node));
            continue;
        }
        if (opts.trace && res.nodes % 1000 == 0) {
            double lb = open.empty() ? node.bound : std::min(node.bound, open.top().bound);
            opts.trace(res.nodes, have_incumbent ? incumbent_cost : lp::kInf, lb);
        }
        if (rel.status != lp::Status::Optimal) continue;  // infeasible subproblem
        if (!root_done) {
            res.root_lp_bound = rel.objective;
            root_done = true;
        }
        if (rel.objective >= incumbent_cost - kPruneTol) continue;

        // Most fractional edge variable, ties to the smallest index.
        int branch_var = -1;
        double best_frac = kIntTol;
        for (int v = 0; v < model.num_edge_vars(); ++v) {
            double x = rel.x[v];
            double frac = std::min(x - std::floor(x), std::ceil(x) - x);
            if (frac > best_frac + 1e-12) {
                best_frac = frac;
                branch_var = v;
            }
        }

        if (branch_var < 0) {
            // Integral: new incumbent.
            Solution sol;
            sol.routes = routes_from_edges(model, rel.x);
            sol.cost = solution_cost(dist, sol.routes);
            if (sol.cost < incumbent_cost - kPruneTol) {
                incumbent_cost = sol.cost;
                res.solution = std::move(sol);
                have_incumbent = true;
            }
            continue;
        }

        double frac = rel.x[branch_var];
        Node up{node.fixings, rel.objective, node.depth + 1, next_id++};
        up.fixings.emplace_back(branch_var, 1.0);
        Node down{std::move(node.fixings), rel.objective, node.depth + 1, next_id++};
        down.fixings.emplace_back(branch_var, 0.0);
        // Dive on the rounding of the fractional value, defer the sibling.
        if (frac >= 0.5) {
            dive = std::move(up);
            open.push(std::move(down));
        } else {
            dive = std::move(down);
            open.push(std::move(up));
        }
        have_dive = true;
    }

    if (exhausted) {
        res.status = have_incumbent ? BnbStatus::Optimal : BnbStatus::TimeLimitNone;
        res.lower_bound = have_incumbent ? incumbent_cost : 0.0;
    } else {
        double lb = incumbent_cost;
        if (have_dive) lb = std::min(lb, dive.bound);
        if (!open.empty()) lb = std::min(lb, open.top().bound);
        res.lower_bound = lb;
        res.status = have_incumbent ? BnbStatus::TimeLimitFeasible : BnbStatus::TimeLimitNone;
    }
    return res;
}

}  // namespace cvrp::exact
