#include "cvrp/policy/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace cvrp::policy {

namespace {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t counter) {
    std::uint64_t z = base ^ (stream * 0x9e3779b97f4a7c15ULL) ^ (counter + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double mean(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Discounted episodic return; equals -cost when gamma == 1.
double episode_return(const DistanceMatrix& dist, const std::vector<int>& actions,
                      double gamma) {
    double r = 0.0, g = 1.0;
    int cur = 0;
    for (int a : actions) {
        r -= g * dist(cur, a);
        cur = a;
        g *= gamma;
    }
    return r;
}

void check_finite_or_throw(const PolicyParams& p, const char* what) {
    std::string bad;
    p.visit([&](const std::string& name, const Mat& m) {
        if (bad.empty() && !all_finite(m)) bad = name;
    });
    if (!bad.empty())
        throw std::runtime_error(std::string("non-finite ") + what + " in tensor '" + bad + "'");
}

std::vector<Mat*> tensor_list(PolicyParams& p) {
    std::vector<Mat*> out;
    p.visit([&](const std::string&, Mat& m) { out.push_back(&m); });
    return out;
}

}  // namespace

void TrainConfig::check() const {
    model.check();
    if (learning_rate < 0.0) throw ConfigError("learning_rate must be >= 0");
    if (batch_size < 1 || epochs < 0 || batches_per_epoch < 1)
        throw ConfigError("batch_size and batches_per_epoch must be >= 1, epochs >= 0");
    if (gamma <= 0.0 || gamma > 1.0) throw ConfigError("gamma must be in (0, 1]");
    if (ema_decay < 0.0 || ema_decay >= 1.0) throw ConfigError("ema_decay must be in [0, 1)");
    if (heldout_size < 1) throw ConfigError("heldout_size must be >= 1");
    if (n_customers < 1 || demand_max < 1 || static_cast<double>(demand_max) > capacity)
        throw ConfigError("instance stream needs n >= 1 and 1 <= demand_max <= capacity");
}

std::string train_config_to_json(const TrainConfig& cfg) {
    nlohmann::json j;
    j["embedding_dim"] = cfg.model.embedding_dim;
    j["encoder_layers"] = cfg.model.encoder_layers;
    j["num_heads"] = cfg.model.num_heads;
    j["ff_dim"] = cfg.model.ff_dim;
    j["problem"] = cfg.model.problem == ProblemKind::Cvrp ? "cvrp" : "tsp";
    j["learning_rate"] = cfg.learning_rate;
    j["batch_size"] = cfg.batch_size;
    j["epochs"] = cfg.epochs;
    j["batches_per_epoch"] = cfg.batches_per_epoch;
    j["baseline"] = cfg.baseline == BaselineKind::Rollout ? "rollout"
                    : cfg.baseline == BaselineKind::Ema   ? "ema"
                                                          : "none";
    j["gamma"] = cfg.gamma;
    j["ema_decay"] = cfg.ema_decay;
    j["seed"] = cfg.seed;
    j["n_customers"] = cfg.n_customers;
    j["demand_max"] = cfg.demand_max;
    j["capacity"] = cfg.capacity;
    j["heldout_size"] = cfg.heldout_size;
    return j.dump(2);
}

TrainConfig train_config_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("invalid training config JSON: ") + e.what());
    }
    TrainConfig cfg;
    cfg.model.embedding_dim = j.value("embedding_dim", cfg.model.embedding_dim);
    cfg.model.encoder_layers = j.value("encoder_layers", cfg.model.encoder_layers);
    cfg.model.num_heads = j.value("num_heads", cfg.model.num_heads);
    cfg.model.ff_dim = j.value("ff_dim", cfg.model.ff_dim);
    std::string problem = j.value("problem", std::string("cvrp"));
    if (problem == "cvrp")
        cfg.model.problem = ProblemKind::Cvrp;
    else if (problem == "tsp")
        cfg.model.problem = ProblemKind::Tsp;
    else
        throw ConfigError("problem must be \"cvrp\" or \"tsp\", got \"" + problem + "\"");
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.batches_per_epoch = j.value("batches_per_epoch", cfg.batches_per_epoch);
    std::string baseline = j.value("baseline", std::string("rollout"));
    if (baseline == "rollout")
        cfg.baseline = BaselineKind::Rollout;
    else if (baseline == "ema")
        cfg.baseline = BaselineKind::Ema;
    else if (baseline == "none")
        cfg.baseline = BaselineKind::None;
    else
        throw ConfigError("baseline must be rollout, ema or none, got \"" + baseline + "\"");
    cfg.gamma = j.value("gamma", cfg.gamma);
    cfg.ema_decay = j.value("ema_decay", cfg.ema_decay);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.n_customers = j.value("n_customers", cfg.n_customers);
    cfg.demand_max = j.value("demand_max", cfg.demand_max);
    cfg.capacity = j.value("capacity", cfg.capacity);
    cfg.heldout_size = j.value("heldout_size", cfg.heldout_size);
    cfg.check();
    return cfg;
}

std::string curve_csv(const std::vector<CurveRow>& rows) {
    std::ostringstream out;
    out << "epoch,batch,mean_cost,baseline_cost,wall_seconds\n";
    char buf[128];
    for (const CurveRow& r : rows) {
        std::snprintf(buf, sizeof buf, "%d,%d,%.6f,%.6f,%.3f\n", r.epoch, r.batch,
                      r.mean_cost, r.baseline_cost, r.wall_seconds);
        out << buf;
    }
    return out.str();
}

std::vector<CurveRow> parse_curve_csv(const std::string& text) {
    std::vector<CurveRow> rows;
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        CurveRow r;
        if (std::sscanf(line.c_str(), "%d,%d,%lf,%lf,%lf", &r.epoch, &r.batch, &r.mean_cost,
                        &r.baseline_cost, &r.wall_seconds) != 5)
            throw std::runtime_error("malformed curve row: " + line);
        rows.push_back(r);
    }
    return rows;
}

TrainResult train_reinforce(const TrainConfig& cfg, const PolicyParams* initial,
                            const Instance* fixed,
                            const std::function<void(const CurveRow&)>& on_row) {
    cfg.check();
    TrainResult result;
    if (initial) {
        if (initial->config.embedding_dim != cfg.model.embedding_dim ||
            initial->config.problem != cfg.model.problem)
            throw ConfigError("warm-start weights do not match the training config");
        result.params = *initial;
    } else {
        result.params = init_params(cfg.model, cfg.seed);
    }
    PolicyParams& params = result.params;
    check_finite_or_throw(params, "parameter");

    std::vector<Instance> heldout;
    if (fixed) {
        heldout.push_back(*fixed);
    } else {
        for (int i = 0; i < cfg.heldout_size; ++i)
            heldout.push_back(env::random_instance(cfg.n_customers, cfg.demand_max,
                                                   cfg.capacity,
                                                   derive_seed(cfg.seed, 1, i)));
    }
    result.untrained_heldout_mean = mean(greedy_costs_parallel(params, heldout));

    PolicyParams baseline_params = params;  // frozen copy for the rollout baseline
    double ema = 0.0;
    bool ema_ready = false;
    double fixed_baseline_return = 0.0;  // per-epoch cache for the constant-instance mode
    bool fixed_baseline_ready = false;

    std::uint64_t counter = 0;
    auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        fixed_baseline_ready = false;
        for (int batch = 0; batch < cfg.batches_per_epoch; ++batch) {
            PolicyParams grad = zeros_like(params);
            std::vector<double> costs, baseline_costs;
            for (int e = 0; e < cfg.batch_size; ++e, ++counter) {
                Instance inst =
                    fixed ? *fixed
                          : env::random_instance(cfg.n_customers, cfg.demand_max,
                                                 cfg.capacity, derive_seed(cfg.seed, 2, counter));
                Episode ep = rollout_training(params, inst, derive_seed(cfg.seed, 3, counter),
                                              /*sample=*/true);
                DistanceMatrix dist(inst);
                double ret = episode_return(dist, ep.actions, cfg.gamma);
                double b = 0.0;
                switch (cfg.baseline) {
                    case BaselineKind::Rollout: {
                        if (fixed && fixed_baseline_ready) {
                            b = fixed_baseline_return;
                        } else {
                            RolloutResult base = rollout(baseline_params, inst);
                            b = episode_return(dist, base.actions, cfg.gamma);
                            if (fixed) {
                                fixed_baseline_return = b;
                                fixed_baseline_ready = true;
                            }
                        }
                        break;
                    }
                    case BaselineKind::Ema:
                        b = ema_ready ? ema : ret;
                        break;
                    case BaselineKind::None:
                        b = 0.0;
                        break;
                }
                double advantage = ret - b;
                backward_episode(params, *ep.cache, ep.enc, ep.steps,
                                 advantage / cfg.batch_size, grad);
                costs.push_back(ep.cost);
                baseline_costs.push_back(-b);
            }
            check_finite_or_throw(grad, "gradient");
            {
                std::vector<Mat*> pm = tensor_list(params);
                std::vector<Mat*> gm = tensor_list(grad);
                for (size_t t = 0; t < pm.size(); ++t)
                    for (size_t i = 0; i < pm[t]->v.size(); ++i)
                        pm[t]->v[i] -= cfg.learning_rate * gm[t]->v[i];
            }
            check_finite_or_throw(params, "parameter");
            if (cfg.baseline == BaselineKind::Ema) {
                double batch_ret = -mean(costs);
                ema = ema_ready ? cfg.ema_decay * ema + (1.0 - cfg.ema_decay) * batch_ret
                                : batch_ret;
                ema_ready = true;
            }
            CurveRow row{epoch, batch, mean(costs), mean(baseline_costs), elapsed()};
            result.curve.push_back(row);
            if (on_row) on_row(row);
        }
        double hm = mean(greedy_costs_parallel(params, heldout));
        result.heldout_mean.push_back(hm);
        if (cfg.baseline == BaselineKind::Rollout) {
            double bm = mean(greedy_costs_parallel(baseline_params, heldout));
            if (hm < bm) baseline_params = params;
        }
    }
    return result;
}

TrainResult train_overfit(const TrainConfig& cfg, const Instance& inst) {
    return train_reinforce(cfg, nullptr, &inst);
}

PolicyParams transfer_init(const PolicyParams& source, const PolicyConfig& target,
                           std::uint64_t seed) {
    if (source.config.embedding_dim != target.embedding_dim)
        throw ConfigError("transfer_init: embedding_dim mismatch (" +
                          std::to_string(source.config.embedding_dim) + " vs " +
                          std::to_string(target.embedding_dim) + ")");
    PolicyParams dst = init_params(target, seed);

    auto copy_widened = [](const Mat& src, Mat& out) {
        // Same column count, possibly more rows: old rows copied, new feature
        // rows zeroed so the added inputs start with no influence.
        if (src.cols != out.cols || src.rows > out.rows) return;
        out.zero();
        std::copy(src.v.begin(), src.v.end(), out.v.begin());
    };
    auto copy_same = [](const Mat& src, Mat& out) {
        if (src.same_shape(out)) out = src;
    };

    copy_widened(source.w_in, dst.w_in);
    copy_same(source.b_in, dst.b_in);
    size_t shared_layers = std::min(source.layers.size(), dst.layers.size());
    for (size_t l = 0; l < shared_layers; ++l) {
        const LayerParams& s = source.layers[l];
        LayerParams& d = dst.layers[l];
        copy_same(s.wq, d.wq);
        copy_same(s.wk, d.wk);
        copy_same(s.wv, d.wv);
        copy_same(s.wo, d.wo);
        copy_same(s.ln1_g, d.ln1_g);
        copy_same(s.ln1_b, d.ln1_b);
        copy_same(s.w1, d.w1);
        copy_same(s.b1, d.b1);
        copy_same(s.w2, d.w2);
        copy_same(s.b2, d.b2);
        copy_same(s.ln2_g, d.ln2_g);
        copy_same(s.ln2_b, d.ln2_b);
    }
    copy_widened(source.w_ctx, dst.w_ctx);
    copy_same(source.b_ctx, dst.b_ctx);
    copy_same(source.w_p, dst.w_p);
    copy_same(source.logit_clip, dst.logit_clip);
    return dst;
}

double gradient_check(const PolicyConfig& tiny, std::uint64_t seed, bool corrupt) {
    tiny.check();
    PolicyParams params = init_params(tiny, seed);
    Instance inst = env::random_instance(3, 5, 10.0, derive_seed(seed, 7, 0));
    Episode ep = rollout_training(params, inst, derive_seed(seed, 8, 0), /*sample=*/true);
    const double advantage = 0.7;

    PolicyParams grad = zeros_like(params);
    backward_episode(params, *ep.cache, ep.enc, ep.steps, advantage, grad);
    if (corrupt) grad.w_ctx.v[0] += 0.5;

    auto loss = [&] {
        Episode replay = evaluate_actions(params, inst, ep.actions);
        return -advantage * replay.log_prob;
    };

    const double h = 1e-5;
    double max_rel = 0.0;
    std::vector<Mat*> pm = tensor_list(params);
    std::vector<Mat*> gm = tensor_list(grad);
    for (size_t t = 0; t < pm.size(); ++t) {
        for (size_t i = 0; i < pm[t]->v.size(); ++i) {
            double orig = pm[t]->v[i];
            pm[t]->v[i] = orig + h;
            double up = loss();
            pm[t]->v[i] = orig - h;
            double down = loss();
            pm[t]->v[i] = orig;
            double numeric = (up - down) / (2.0 * h);
            double analytic = gm[t]->v[i];
            double rel = std::fabs(analytic - numeric) /
                         std::max({1e-4, std::fabs(analytic), std::fabs(numeric)});
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

int plateau_epoch(const std::vector<double>& per_epoch_cost) {
    if (per_epoch_cost.empty()) return -1;
    // Judge the running minimum so later noise cannot un-plateau a run: the
    // plateau starts once the best cost seen so far is within 1% of the
    // run's final best.
    double final_best = *std::min_element(per_epoch_cost.begin(), per_epoch_cost.end());
    double threshold = final_best + 0.01 * std::fabs(final_best);
    double best = std::numeric_limits<double>::infinity();
    for (size_t e = 0; e < per_epoch_cost.size(); ++e) {
        best = std::min(best, per_epoch_cost[e]);
        if (best <= threshold) return static_cast<int>(e);
    }
    return -1;  // unreachable for non-empty input
}

}  // namespace cvrp::policy
