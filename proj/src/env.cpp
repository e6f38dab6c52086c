#include "cvrp/env.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace cvrp::env {

namespace {

// splitmix64; keeps generated instances identical across platforms.
struct Rng {
    std::uint64_t state;
    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    int uniform_int(int lo, int hi) {  // inclusive
        return lo + static_cast<int>(next() % static_cast<std::uint64_t>(hi - lo + 1));
    }
};

}  // namespace

int ActionMask::count() const {
    int c = 0;
    for (char a : allowed) c += a != 0;
    return c;
}

bool EnvState::all_served() const {
    for (size_t i = 1; i < residual_demand.size(); ++i)
        if (residual_demand[i] > 0.0) return false;
    return true;
}

EnvState reset(const Instance& inst, const DistanceMatrix& dist) {
    EnvState s;
    s.instance = &inst;
    s.dist = &dist;
    s.current_node = 0;
    s.truck_load = inst.capacity;
    s.residual_demand.assign(inst.num_customers() + 1, 0.0);
    for (int i = 1; i <= inst.num_customers(); ++i) s.residual_demand[i] = inst.demand(i);
    s.visited.assign(inst.num_customers() + 1, 0);
    return s;
}

ActionMask feasible_actions(const EnvState& s) {
    int n = s.instance->num_customers();
    ActionMask mask;
    mask.allowed.assign(n + 1, 0);
    for (int i = 1; i <= n; ++i)
        if (s.residual_demand[i] > 0.0 && s.residual_demand[i] <= s.truck_load)
            mask.allowed[i] = 1;
    // Depot: return trip only, no self-loop. When nothing fits it is the
    // forced fallback; when everything is served it is the only way to close.
    if (s.current_node != 0) mask.allowed[0] = 1;
    return mask;
}

std::pair<EnvState, bool> step(const EnvState& s, int action) {
    ActionMask mask = feasible_actions(s);
    if (action < 0 || action >= static_cast<int>(mask.allowed.size()) ||
        !mask.is_allowed(action))
        throw std::logic_error("env::step: action " + std::to_string(action) +
                               " is masked in the current state");
    EnvState next = s;
    next.distance_so_far += (*s.dist)(s.current_node, action);
    next.current_node = action;
    next.action_history.push_back(action);
    if (action == 0) {
        next.truck_load = s.instance->capacity;
    } else {
        next.truck_load -= s.residual_demand[action];
        next.residual_demand[action] = 0.0;
        next.visited[action] = 1;
    }
    bool terminal = action == 0 && next.all_served();
    return {std::move(next), terminal};
}

double episode_reward(double total_distance) { return -total_distance; }

std::vector<Route> routes_from_episode(const std::vector<int>& actions) {
    std::vector<Route> routes;
    Route current;
    for (int a : actions) {
        if (a == 0) {
            if (!current.empty()) routes.push_back(std::move(current));
            current.clear();
        } else {
            current.push_back(a);
        }
    }
    if (!current.empty()) routes.push_back(std::move(current));
    return routes;
}

std::string episode_trace_csv(const Instance& inst, const std::vector<int>& actions) {
    DistanceMatrix dist(inst);
    std::ostringstream out;
    out << "step,node,load,distance\n";
    EnvState s = reset(inst, dist);
    out << "0,0," << s.truck_load << ",0\n";
    int t = 1;
    for (int a : actions) {
        s = step(s, a).first;
        out << t++ << "," << a << "," << s.truck_load << "," << s.distance_so_far << "\n";
    }
    return out.str();
}

Instance random_instance(int n, int demand_max, double capacity, std::uint64_t seed) {
    if (n < 1) throw std::domain_error("random_instance: n must be >= 1");
    if (demand_max < 1 || static_cast<double>(demand_max) > capacity)
        throw std::domain_error("random_instance: need 1 <= demand_max <= capacity");
    Rng rng{seed};
    Instance inst;
    inst.name = "random-n" + std::to_string(n) + "-s" + std::to_string(seed);
    inst.capacity = capacity;
    inst.depot = {rng.uniform(), rng.uniform()};
    for (int i = 0; i < n; ++i) {
        Point p{rng.uniform(), rng.uniform()};
        double q = rng.uniform_int(1, demand_max);
        inst.customers.push_back({p, q});
    }
    return inst;
}

}  // namespace cvrp::env
