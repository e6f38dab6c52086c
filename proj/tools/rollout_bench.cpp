// Compares the serial reference batched-rollout kernel against the
// OpenMP-parallel one: verifies bit-identical costs, reports throughput.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <vector>

#include "CLI11.hpp"
#include "cvrp/env.hpp"
#include "cvrp/policy/rollout.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

int main(int argc, char** argv) {
    CLI::App app{"Benchmark serial vs parallel batched policy rollouts"};
    int n_customers = 20, batch = 128, reps = 3, embedding_dim = 64;
    std::uint64_t seed = 1;
    app.add_option("--customers", n_customers, "customers per instance");
    app.add_option("--batch", batch, "instances per batch");
    app.add_option("--reps", reps, "timed repetitions");
    app.add_option("--dim", embedding_dim, "embedding dimension");
    app.add_option("--seed", seed, "seed");
    CLI11_PARSE(app, argc, argv);

    cvrp::policy::PolicyConfig config;
    config.embedding_dim = embedding_dim;
    cvrp::policy::PolicyParams params = cvrp::policy::init_params(config, seed);

    std::vector<cvrp::Instance> instances;
    for (int i = 0; i < batch; ++i)
        instances.push_back(cvrp::env::random_instance(n_customers, 9, 30.0, seed + i));

    using clock = std::chrono::steady_clock;
    auto time_runs = [&](auto&& fn, std::vector<double>& costs) {
        double best = 1e300;
        for (int r = 0; r < reps; ++r) {
            auto t0 = clock::now();
            costs = fn();
            double s = std::chrono::duration<double>(clock::now() - t0).count();
            if (s < best) best = s;
        }
        return best;
    };

    std::vector<double> serial_costs, parallel_costs;
    double serial_s = time_runs(
        [&] { return cvrp::policy::greedy_costs_serial(params, instances); }, serial_costs);
    double parallel_s = time_runs(
        [&] { return cvrp::policy::greedy_costs_parallel(params, instances); },
        parallel_costs);

    bool identical = serial_costs == parallel_costs;
#ifdef _OPENMP
    int threads = omp_get_max_threads();
#else
    int threads = 1;
#endif
    std::printf("batch %d x n=%d, dim %d, %d threads\n", batch, n_customers, embedding_dim,
                threads);
    std::printf("serial   %.3f s  (%.1f episodes/s)\n", serial_s, batch / serial_s);
    std::printf("parallel %.3f s  (%.1f episodes/s, speedup %.2fx)\n", parallel_s,
                batch / parallel_s, serial_s / parallel_s);
    std::printf("costs bit-identical: %s\n", identical ? "yes" : "NO");
    return identical ? 0 : 1;
}
