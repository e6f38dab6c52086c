#ifndef CVRP_POLICY_ROLLOUT_HPP
#define CVRP_POLICY_ROLLOUT_HPP

#include <cstdint>
#include <memory>
#include <vector>

#include "cvrp/policy/model.hpp"

namespace cvrp::policy {

enum class DecodeMode { Greedy, Sample, Beam };

struct RolloutOptions {
    DecodeMode mode = DecodeMode::Greedy;
    std::uint64_t seed = 0;  // Sample mode only
    int beam_width = 1;      // Beam mode only
};

struct RolloutResult {
    std::vector<int> actions;  // full node sequence excluding the start depot
    Solution solution;
    double cost = 0.0;
    double log_prob = 0.0;  // sum_t log pi(a_t)
};

// Decode one episode. Greedy takes the argmax action (smallest index on
// ties), Sample draws from the step distribution, Beam keeps `beam_width`
// partial sequences by log probability with slot-nested selection so widening
// the beam never loses a completed sequence; the cheapest completed sequence
// is returned.
RolloutResult rollout(const PolicyParams& params, const Instance& inst,
                      const RolloutOptions& opts = {});

// A sampled (or greedy) episode with the activations needed for the backward
// pass kept alive.
struct Episode {
    std::shared_ptr<EncoderCache> cache;
    Encoding enc;
    std::vector<StepCache> steps;
    std::vector<int> actions;
    double cost = 0.0;
    double log_prob = 0.0;
};

Episode rollout_training(const PolicyParams& params, const Instance& inst,
                         std::uint64_t seed, bool sample);

// Teacher-forced pass: replay a fixed action sequence and record caches and
// log probability. Used by the finite-difference gradient check.
Episode evaluate_actions(const PolicyParams& params, const Instance& inst,
                         const std::vector<int>& actions);

// Greedy decode costs for a batch of instances. The serial version is the
// reference; the parallel version fans instances out over OpenMP threads and
// must agree bit-for-bit.
std::vector<double> greedy_costs_serial(const PolicyParams& params,
                                        const std::vector<Instance>& batch);
std::vector<double> greedy_costs_parallel(const PolicyParams& params,
                                          const std::vector<Instance>& batch);

}  // namespace cvrp::policy

#endif
