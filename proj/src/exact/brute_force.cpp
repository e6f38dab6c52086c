#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cvrp/exact.hpp"

namespace cvrp::exact {

namespace {

constexpr double kTieTol = 1e-12;

// Lexicographically canonical orientation of a single route.
Route canonical(Route r) {
    Route rev(r.rbegin(), r.rend());
    return rev < r ? rev : r;
}

}  // namespace

Solution brute_force_optimal(const Instance& inst) {
    const int n = inst.num_customers();
    if (n > 9)
        throw std::invalid_argument("brute_force_optimal: instance too large (n > 9)");
    inst.check_invariants();
    DistanceMatrix dist(inst);

    const int full = (1 << n) - 1;
    // Held-Karp path costs: tsp[S][j] = cheapest depot->...->j path covering S.
    std::vector<std::vector<double>> tsp(full + 1, std::vector<double>(n, lp::kInf));
    std::vector<std::vector<int>> pred(full + 1, std::vector<int>(n, -1));
    for (int j = 0; j < n; ++j) tsp[1 << j][j] = dist(0, j + 1);
    for (int S = 1; S <= full; ++S) {
        for (int j = 0; j < n; ++j) {
            if (!(S & (1 << j)) || tsp[S][j] >= lp::kInf) continue;
            for (int k = 0; k < n; ++k) {
                if (S & (1 << k)) continue;
                int S2 = S | (1 << k);
                double c = tsp[S][j] + dist(j + 1, k + 1);
                if (c < tsp[S2][k] - kTieTol) {
                    tsp[S2][k] = c;
                    pred[S2][k] = j;
                }
            }
        }
    }

    std::vector<double> subset_demand(full + 1, 0.0);
    for (int S = 1; S <= full; ++S) {
        int low = __builtin_ctz(S);
        subset_demand[S] = subset_demand[S & (S - 1)] + inst.demand(low + 1);
    }

    std::vector<double> route_cost(full + 1, lp::kInf);
    std::vector<int> route_end(full + 1, -1);
    for (int S = 1; S <= full; ++S) {
        if (subset_demand[S] > inst.capacity) continue;
        for (int j = 0; j < n; ++j) {
            if (!(S & (1 << j))) continue;
            double c = tsp[S][j] + dist(j + 1, 0);
            if (c < route_cost[S] - kTieTol) {
                route_cost[S] = c;
                route_end[S] = j;
            }
        }
    }

    // Partition DP over customer subsets; the route containing the lowest
    // unserved customer is chosen explicitly, submasks scanned in increasing
    // order so the reconstruction is deterministic.
    std::vector<double> best(full + 1, lp::kInf);
    std::vector<int> choice(full + 1, 0);
    best[0] = 0.0;
    for (int S = 1; S <= full; ++S) {
        int low_bit = S & -S;
        for (int T = S; T; T = (T - 1) & S) {
            if (!(T & low_bit) || route_cost[T] >= lp::kInf) continue;
            double c = route_cost[T] + best[S & ~T];
            if (c < best[S] - kTieTol) {
                best[S] = c;
                choice[S] = T;
            }
        }
    }

    Solution sol;
    for (int S = full; S;) {
        int T = choice[S];
        Route r;
        int j = route_end[T];
        for (int M = T; j != -1;) {
            r.push_back(j + 1);
            int pj = pred[M][j];
            M &= ~(1 << j);
            j = pj;
        }
        std::reverse(r.begin(), r.end());
        sol.routes.push_back(canonical(std::move(r)));
        S &= ~T;
    }
    std::sort(sol.routes.begin(), sol.routes.end());
    sol.cost = solution_cost(dist, sol.routes);
    return sol;
}

}  // namespace cvrp::exact
