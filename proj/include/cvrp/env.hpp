#ifndef CVRP_ENV_HPP
#define CVRP_ENV_HPP

#include <cstdint>
#include <memory>
#include <vector>

#include "cvrp/instance.hpp"

namespace cvrp::env {

struct ActionMask {
    std::vector<char> allowed;  // node 0..n
    bool is_allowed(int node) const { return allowed[node] != 0; }
    int count() const;
};

// MDP state: current node, residual demands, truck load, distance so far.
// Transitions are pure; step() returns a fresh state.
struct EnvState {
    const Instance* instance = nullptr;
    const DistanceMatrix* dist = nullptr;
    int current_node = 0;
    std::vector<double> residual_demand;  // index 1..n (slot 0 unused)
    double truck_load = 0.0;
    double distance_so_far = 0.0;
    std::vector<char> visited;  // index 1..n
    std::vector<int> action_history;

    bool all_served() const;
    bool terminal() const { return all_served() && current_node == 0 && !action_history.empty(); }
};

EnvState reset(const Instance& inst, const DistanceMatrix& dist);

// Customer i allowed iff unserved and its full demand fits the load; depot
// allowed iff the truck is away from it. Never empty on a non-terminal state.
ActionMask feasible_actions(const EnvState& s);

// Throws std::logic_error if `action` is masked.
std::pair<EnvState, bool> step(const EnvState& s, int action);

double episode_reward(double total_distance);

// Route list implied by the action history of a finished episode.
std::vector<Route> routes_from_episode(const std::vector<int>& actions);

// Per-step trace rows for qualitative route inspection.
std::string episode_trace_csv(const Instance& inst, const std::vector<int>& actions);

// Uniform coordinates on the unit square, integer demands in [1, demand_max].
// Deterministic for a given seed across platforms.
Instance random_instance(int n, int demand_max, double capacity, std::uint64_t seed);

}  // namespace cvrp::env

#endif
