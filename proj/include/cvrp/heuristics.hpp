#ifndef CVRP_HEURISTICS_HPP
#define CVRP_HEURISTICS_HPP

#include <cstdint>
#include <vector>

#include "cvrp/instance.hpp"

namespace cvrp::heur {

struct Saving {
    int i, j;      // customer pair, i < j
    double value;  // c_0i + c_0j - c_ij
};

// All positive savings, sorted by value descending, ties by smaller (i, j).
std::vector<Saving> compute_savings(const Instance& inst, const DistanceMatrix& dist);

// Parallel savings construction: merge route ends by best positive saving
// while capacity allows. Always returns a feasible solution.
Solution clarke_wright(const Instance& inst);

struct LocalSearchOptions {
    double budget_s = 1e18;
    long max_moves = 0;  // > 0 replaces the wall clock for determinism
    std::uint64_t seed = 0;
    int neighbor_limit = 15;  // candidate list size, applied when n > 30
};

// Best-improvement descent over 2-opt, Or-opt, relocate, swap and 2-opt*.
// Never returns a solution worse than `start`.
Solution local_search(const Instance& inst, const Solution& start,
                      const LocalSearchOptions& opts = {});

struct ImprovementEntry {
    double seconds;
    double cost;
};

struct GlsOptions {
    double budget_s = 60.0;
    std::uint64_t seed = 0;
    long max_outer_iters = 0;  // > 0 replaces the wall clock
    int neighbor_limit = 15;
    std::vector<ImprovementEntry>* improvement_log = nullptr;
};

// Clarke-Wright start, then guided local search: repeat local search on the
// penalized objective, penalizing max-utility edges of each local optimum.
// The returned solution is the best seen under the true objective.
Solution guided_local_search(const Instance& inst, const GlsOptions& opts = {});

}  // namespace cvrp::heur

#endif
