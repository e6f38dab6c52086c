#ifndef CVRP_POLICY_TRAIN_HPP
#define CVRP_POLICY_TRAIN_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cvrp/policy/rollout.hpp"

namespace cvrp::policy {

enum class BaselineKind { Rollout, Ema, None };

struct TrainConfig {
    PolicyConfig model;
    double learning_rate = 1e-4;
    int batch_size = 32;
    int epochs = 50;
    int batches_per_epoch = 8;
    BaselineKind baseline = BaselineKind::Rollout;
    double gamma = 1.0;      // undiscounted episodic objective
    double ema_decay = 0.9;  // Ema baseline only
    std::uint64_t seed = 0;

    // Random instance stream and held-out evaluation batch.
    int n_customers = 20;
    int demand_max = 9;
    double capacity = 30.0;
    int heldout_size = 256;

    void check() const;  // throws ConfigError
};

std::string train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const std::string& text);

struct CurveRow {
    int epoch = 0;
    int batch = 0;
    double mean_cost = 0.0;      // sampled rollout cost, batch mean
    double baseline_cost = 0.0;  // baseline value, batch mean
    double wall_seconds = 0.0;   // since training start
};

std::string curve_csv(const std::vector<CurveRow>& rows);
std::vector<CurveRow> parse_curve_csv(const std::string& text);

struct TrainResult {
    PolicyParams params;
    std::vector<CurveRow> curve;
    std::vector<double> heldout_mean;  // greedy cost on the held-out batch per epoch
    double untrained_heldout_mean = 0.0;
};

// REINFORCE with the configured baseline. The gradient of the surrogate
// -(A/B) sum_t log pi(a_t) is accumulated per episode and applied with a
// plain fixed-step update; A is the return advantage (baseline cost minus
// episode cost). With the rollout baseline, a frozen policy copy scores each
// instance greedily and is replaced at epoch end when the live policy's mean
// greedy held-out cost is lower. Non-finite gradients abort with the name of
// the first offending tensor.
// `initial` warm-starts training (weight reuse); `fixed` trains on one
// constant instance (overfitting mode) and evaluates on it.
TrainResult train_reinforce(const TrainConfig& cfg, const PolicyParams* initial = nullptr,
                            const Instance* fixed = nullptr,
                            const std::function<void(const CurveRow&)>& on_row = {});

TrainResult train_overfit(const TrainConfig& cfg, const Instance& inst);

// Widens a policy to a target problem kind with the same embedding_dim: every
// shape-compatible tensor is copied; the input projection and context
// projection gain zero rows for the new demand/load features; anything else
// (extra encoder layers, changed widths) keeps its fresh initialization.
PolicyParams transfer_init(const PolicyParams& source, const PolicyConfig& target,
                           std::uint64_t seed = 0);

// Max relative error between the analytic gradient and central finite
// differences (h = 1e-5) of the surrogate loss over every parameter, on a
// small random instance. `corrupt` perturbs one analytic entry first so tests
// can confirm the check has teeth.
double gradient_check(const PolicyConfig& tiny, std::uint64_t seed, bool corrupt = false);

// First epoch at which the running-minimum cost is within 1% relative of the
// run's final best; -1 only for an empty series. Judging the running minimum
// makes the plateau immune to later noise in the per-epoch evaluation.
int plateau_epoch(const std::vector<double>& per_epoch_cost);

}  // namespace cvrp::policy

#endif
