#include <cmath>
#include <fstream>
#include <sstream>

#include "cvrp/env.hpp"
#include "cvrp/exact.hpp"
#include "cvrp/instance.hpp"
#include "doctest.h"

using namespace cvrp;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE_MESSAGE(in.good(), "missing test data file: " << path);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

Instance toy(std::vector<Customer> customers, double capacity, Point depot = {0, 0}) {
    Instance inst;
    inst.name = "toy";
    inst.depot = depot;
    inst.customers = std::move(customers);
    inst.capacity = capacity;
    return inst;
}

// splitmix64, local to the tests so rollout randomness is independent of the
// library's own generators.
struct TestRng {
    std::uint64_t s;
    std::uint64_t next() {
        std::uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
};

}  // namespace

TEST_CASE("reset") {
    SUBCASE("benchmark instance starts full at the depot") {
        Instance inst = parse_cvrplib(slurp("data/cmt/CMT1.vrp"));
        DistanceMatrix dist(inst);
        env::EnvState s = env::reset(inst, dist);
        CHECK(s.current_node == 0);
        CHECK(s.truck_load == 160.0);
        CHECK(s.distance_so_far == 0.0);
        int positive = 0;
        for (int i = 1; i <= inst.num_customers(); ++i) positive += s.residual_demand[i] > 0;
        CHECK(positive == 50);
    }
    SUBCASE("idempotent") {
        Instance inst = toy({{{1, 0}, 1}, {{2, 0}, 1}}, 2);
        DistanceMatrix dist(inst);
        env::EnvState a = env::reset(inst, dist);
        env::EnvState b = env::reset(inst, dist);
        CHECK(a.residual_demand == b.residual_demand);
        CHECK(a.truck_load == b.truck_load);
        CHECK(a.current_node == b.current_node);
    }
    SUBCASE("single customer: the only episode is visit then return") {
        Instance inst = toy({{{1, 0}, 1}}, 1);
        DistanceMatrix dist(inst);
        env::EnvState s = env::reset(inst, dist);
        env::ActionMask m0 = env::feasible_actions(s);
        CHECK(m0.count() == 1);
        CHECK(m0.is_allowed(1));
        auto [s1, t1] = env::step(s, 1);
        CHECK_FALSE(t1);
        env::ActionMask m1 = env::feasible_actions(s1);
        CHECK(m1.count() == 1);
        CHECK(m1.is_allowed(0));
        auto [s2, t2] = env::step(s1, 0);
        CHECK(t2);
        CHECK(s2.distance_so_far == doctest::Approx(2.0));
    }
}

TEST_CASE("feasible_actions masking rules") {
    Instance inst = toy({{{1, 0}, 5}, {{2, 0}, 2}, {{3, 0}, 1}}, 8);
    DistanceMatrix dist(inst);
    SUBCASE("demand must fit the remaining load") {
        env::EnvState s = env::reset(inst, dist);
        s = env::step(s, 3).first;  // serve q=1, load 7
        s = env::step(s, 1).first;  // serve q=5, load 2
        // At customer 1 with load 2: customer 2 (q=2) fits, depot allowed.
        env::ActionMask m = env::feasible_actions(s);
        CHECK(m.is_allowed(2));
        CHECK(m.is_allowed(0));
        CHECK_FALSE(m.is_allowed(1));  // already served
        CHECK_FALSE(m.is_allowed(3));  // already served
    }
    SUBCASE("no depot self-loop") {
        env::EnvState s = env::reset(inst, dist);
        env::ActionMask m = env::feasible_actions(s);
        CHECK_FALSE(m.is_allowed(0));
        CHECK(m.is_allowed(1));
        CHECK(m.is_allowed(2));
        CHECK(m.is_allowed(3));
    }
    SUBCASE("all served: only the closing depot return remains") {
        env::EnvState s = env::reset(inst, dist);
        for (int a : {1, 2, 3}) s = env::step(s, a).first;
        env::ActionMask m = env::feasible_actions(s);
        CHECK(m.count() == 1);
        CHECK(m.is_allowed(0));
    }
    SUBCASE("forced depot fallback when nothing fits") {
        Instance tight = toy({{{1, 0}, 4}, {{2, 0}, 4}}, 5);
        DistanceMatrix d2(tight);
        env::EnvState s = env::reset(tight, d2);
        s = env::step(s, 1).first;  // load 1 left, neither q=4 fits
        env::ActionMask m = env::feasible_actions(s);
        CHECK(m.count() == 1);
        CHECK(m.is_allowed(0));
    }
}

TEST_CASE("step") {
    SUBCASE("masked action raises") {
        Instance inst = toy({{{1, 0}, 1}}, 1);
        DistanceMatrix dist(inst);
        env::EnvState s = env::reset(inst, dist);
        CHECK_THROWS_AS(env::step(s, 0), std::logic_error);   // depot self-loop
        CHECK_THROWS_AS(env::step(s, 5), std::logic_error);   // out of range
        auto s1 = env::step(s, 1).first;
        CHECK_THROWS_AS(env::step(s1, 1), std::logic_error);  // already served
    }
    SUBCASE("serving exactly the remaining load empties the truck") {
        Instance inst = toy({{{1, 0}, 3}, {{2, 0}, 3}}, 3);
        DistanceMatrix dist(inst);
        env::EnvState s = env::reset(inst, dist);
        s = env::step(s, 1).first;
        CHECK(s.truck_load == 0.0);
        env::ActionMask m = env::feasible_actions(s);
        CHECK(m.count() == 1);
        CHECK(m.is_allowed(0));
        s = env::step(s, 0).first;
        CHECK(s.truck_load == 3.0);  // reload at the depot
    }
    SUBCASE("replaying oracle routes reproduces the oracle cost") {
        for (int seed : {5, 6, 7}) {
            Instance inst = env::random_instance(7, 5, 12, seed * 101);
            DistanceMatrix dist(inst);
            Solution opt = exact::brute_force_optimal(inst);
            env::EnvState s = env::reset(inst, dist);
            for (const Route& r : opt.routes) {
                for (int c : r) s = env::step(s, c).first;
                s = env::step(s, 0).first;
            }
            CHECK(s.terminal());
            CHECK(s.distance_so_far == doctest::Approx(opt.cost).epsilon(1e-12));
        }
    }
}

TEST_CASE("episode reward and trace") {
    CHECK(env::episode_reward(4.0) == -4.0);
    CHECK(env::episode_reward(0.0) == 0.0);

    SUBCASE("greedy-nearest rollout: reward equals minus the recomputed cost") {
        Instance inst = parse_cvrplib(slurp("data/cmt/CMT1.vrp"));
        DistanceMatrix dist(inst);
        env::EnvState s = env::reset(inst, dist);
        while (!s.terminal()) {
            env::ActionMask m = env::feasible_actions(s);
            int best = -1;
            for (int a = 0; a <= inst.num_customers(); ++a)
                if (m.is_allowed(a) &&
                    (best < 0 || dist(s.current_node, a) < dist(s.current_node, best)))
                    best = a;
            s = env::step(s, best).first;
        }
        std::vector<Route> routes = env::routes_from_episode(s.action_history);
        CHECK(env::episode_reward(s.distance_so_far) == -solution_cost(inst, routes));
    }
    SUBCASE("trace rows cover every step") {
        Instance inst = toy({{{1, 0}, 1}, {{2, 0}, 1}}, 2);
        std::string csv = env::episode_trace_csv(inst, {1, 2, 0});
        CHECK(csv.find("step,node,load,distance") == 0);
        CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);  // header + 4 states
    }
}

TEST_CASE("random instance generator") {
    SUBCASE("deterministic per seed") {
        Instance a = env::random_instance(20, 9, 30, 7);
        Instance b = env::random_instance(20, 9, 30, 7);
        REQUIRE(a.num_customers() == 20);
        for (int i = 0; i <= 20; ++i) {
            CHECK(a.node_pos(i).x == b.node_pos(i).x);
            CHECK(a.demand(i) == b.demand(i));
        }
        Instance c = env::random_instance(20, 9, 30, 8);
        bool differs = false;
        for (int i = 0; i <= 20; ++i) differs = differs || a.node_pos(i).x != c.node_pos(i).x;
        CHECK(differs);
    }
    SUBCASE("ranges") {
        Instance inst = env::random_instance(200, 9, 30, 42);
        for (int i = 1; i <= 200; ++i) {
            CHECK(inst.demand(i) >= 1.0);
            CHECK(inst.demand(i) <= 9.0);
            CHECK(inst.demand(i) == std::floor(inst.demand(i)));
            CHECK(inst.node_pos(i).x >= 0.0);
            CHECK(inst.node_pos(i).x <= 1.0);
            CHECK(inst.node_pos(i).y >= 0.0);
            CHECK(inst.node_pos(i).y <= 1.0);
        }
    }
    SUBCASE("demand mean matches the uniform expectation") {
        const int draws = 100000, demand_max = 9;
        double sum = 0.0;
        Instance inst = env::random_instance(draws, demand_max, 1000, 2024);
        for (int i = 1; i <= draws; ++i) sum += inst.demand(i);
        double mean = sum / draws;
        double expect = (1.0 + demand_max) / 2.0;
        double sigma = std::sqrt((demand_max * demand_max - 1.0) / 12.0 / draws);
        CHECK(std::fabs(mean - expect) <= 3.0 * sigma);
    }
    SUBCASE("domain errors") {
        CHECK_THROWS_AS(env::random_instance(0, 5, 10, 1), std::domain_error);
        CHECK_THROWS_AS(env::random_instance(5, 0, 10, 1), std::domain_error);
        CHECK_THROWS_AS(env::random_instance(5, 11, 10, 1), std::domain_error);
    }
}

TEST_CASE("random-policy rollouts: termination, feasibility, reward consistency") {
    TestRng rng{12345};
    for (int episode = 0; episode < 200; ++episode) {
        int n = 5 + static_cast<int>(rng.next() % 26);
        Instance inst = env::random_instance(n, 9, 30, rng.next());
        DistanceMatrix dist(inst);
        env::EnvState s = env::reset(inst, dist);
        int steps = 0;
        const int bound = 3 * n + 2;
        while (!s.terminal()) {
            REQUIRE(steps < bound);
            env::ActionMask m = env::feasible_actions(s);
            REQUIRE(m.count() > 0);  // mask soundness
            int pick = static_cast<int>(rng.next() % static_cast<std::uint64_t>(m.count()));
            int action = -1;
            for (int a = 0; a <= n && action < 0; ++a)
                if (m.is_allowed(a) && pick-- == 0) action = a;
            s = env::step(s, action).first;
            ++steps;
        }
        Solution sol;
        sol.routes = env::routes_from_episode(s.action_history);
        sol.cost = solution_cost(inst, sol.routes);
        CHECK(validate(inst, sol).feasible());
        CHECK(std::fabs(-env::episode_reward(s.distance_so_far) - sol.cost) <=
              1e-9 * std::max(1.0, sol.cost));
    }
}
