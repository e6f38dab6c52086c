#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "cvrp/env.hpp"
#include "cvrp/policy/rollout.hpp"
#include "cvrp/policy/train.hpp"
#include "cvrp/policy/weights.hpp"
#include "doctest.h"

using namespace cvrp;
using namespace cvrp::policy;

namespace {

PolicyConfig tiny_config() {
    PolicyConfig c;
    c.embedding_dim = 16;
    c.encoder_layers = 2;
    c.num_heads = 2;
    c.ff_dim = 32;
    return c;
}

Instance toy(std::vector<Customer> customers, double capacity, Point depot = {0, 0}) {
    Instance inst;
    inst.name = "toy";
    inst.depot = depot;
    inst.customers = std::move(customers);
    inst.capacity = capacity;
    return inst;
}

bool params_equal(const PolicyParams& a, const PolicyParams& b) {
    bool eq = true;
    int idx = 0;
    std::vector<const Mat*> bm;
    b.visit([&](const std::string&, const Mat& m) { bm.push_back(&m); });
    a.visit([&](const std::string&, const Mat& m) {
        eq = eq && m.same_shape(*bm[idx]) && m.v == bm[idx]->v;
        ++idx;
    });
    return eq;
}

}  // namespace

TEST_CASE("encoder") {
    PolicyParams params = init_params(tiny_config(), 1);
    SUBCASE("permutation of customer input order") {
        Instance a = env::random_instance(8, 5, 15, 11);
        Instance b = a;
        std::reverse(b.customers.begin(), b.customers.end());
        Encoding ea = encode(params, a);
        Encoding eb = encode(params, b);
        // Pooled graph embedding is order-invariant.
        for (int j = 0; j < ea.graph_emb.cols; ++j)
            CHECK(ea.graph_emb.v[j] == doctest::Approx(eb.graph_emb.v[j]).epsilon(1e-9));
        // Node embeddings are equivariant: customer i of `a` is customer
        // n+1-i of `b`.
        int n = a.num_customers();
        for (int i = 1; i <= n; ++i)
            for (int j = 0; j < ea.node_emb.cols; ++j)
                CHECK(ea.node_emb.at(i, j) ==
                      doctest::Approx(eb.node_emb.at(n + 1 - i, j)).epsilon(1e-9));
    }
    SUBCASE("coincident customers get equal embeddings") {
        Instance inst = toy({{{0.5, 0.5}, 2}, {{0.5, 0.5}, 2}, {{0.5, 0.5}, 2}}, 10,
                            {0.5, 0.5});
        Encoding e = encode(params, inst);
        for (int i = 2; i <= 3; ++i)
            for (int j = 0; j < e.node_emb.cols; ++j)
                CHECK(e.node_emb.at(i, j) == doctest::Approx(e.node_emb.at(1, j)));
    }
    SUBCASE("finite embeddings over many random instances") {
        for (int seed = 0; seed < 1000; ++seed) {
            Instance inst = env::random_instance(3 + seed % 18, 9, 30, seed);
            Encoding e = encode(params, inst);
            REQUIRE(all_finite(e.node_emb));
            REQUIRE(all_finite(e.graph_emb));
            REQUIRE(all_finite(e.keys));
        }
    }
    SUBCASE("deterministic per (params, instance)") {
        Instance inst = env::random_instance(10, 5, 20, 3);
        Encoding a = encode(params, inst);
        Encoding b = encode(params, inst);
        CHECK(a.node_emb.v == b.node_emb.v);
    }
    SUBCASE("dimension mismatch raises a configuration error") {
        PolicyParams bad = params;
        bad.w_in = Mat(7, tiny_config().embedding_dim);
        CHECK_THROWS_AS(encode(bad, env::random_instance(5, 5, 10, 1)), ConfigError);
    }
}

TEST_CASE("decode_step") {
    PolicyParams params = init_params(tiny_config(), 2);
    SUBCASE("distribution sums to one and honors the mask") {
        for (int seed = 0; seed < 50; ++seed) {
            Instance inst = env::random_instance(10, 9, 30, seed + 500);
            DistanceMatrix dist(inst);
            Encoding enc = encode(params, inst);
            env::EnvState s = env::reset(inst, dist);
            // Walk a few random steps to reach varied states.
            for (int t = 0; t < 1 + seed % 8 && !s.terminal(); ++t) {
                env::ActionMask m = env::feasible_actions(s);
                for (int a = 0; a <= 10; ++a)
                    if (m.is_allowed(a)) {
                        s = env::step(s, a).first;
                        break;
                    }
            }
            if (s.terminal()) continue;
            env::ActionMask m = env::feasible_actions(s);
            std::vector<double> p = decode_step(params, enc, s.current_node,
                                                s.truck_load / inst.capacity, m);
            double total = 0.0, allowed_total = 0.0;
            for (int a = 0; a <= 10; ++a) {
                total += p[a];
                if (m.is_allowed(a))
                    allowed_total += p[a];
                else
                    CHECK(p[a] == 0.0);  // masked probability is exactly zero
            }
            CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
            CHECK(allowed_total == doctest::Approx(1.0).epsilon(1e-6));
        }
    }
    SUBCASE("a forced move has probability one") {
        Instance inst = toy({{{1, 0}, 1}}, 1);
        DistanceMatrix dist(inst);
        Encoding enc = encode(params, inst);
        env::EnvState s = env::reset(inst, dist);
        std::vector<double> p =
            decode_step(params, enc, 0, 1.0, env::feasible_actions(s));
        CHECK(p[1] == doctest::Approx(1.0));
        CHECK(p[0] == 0.0);
    }
    SUBCASE("indistinguishable customers get identical probabilities") {
        // Same position, same demand: the distribution cannot tell them apart.
        Instance inst = toy({{{0.8, 0.3}, 2}, {{0.8, 0.3}, 2}, {{0.8, 0.3}, 2},
                             {{0.2, 0.7}, 4}},
                            12, {0.5, 0.5});
        DistanceMatrix dist(inst);
        Encoding enc = encode(params, inst);
        env::EnvState s = env::reset(inst, dist);
        std::vector<double> p = decode_step(params, enc, 0, 1.0, env::feasible_actions(s));
        CHECK(p[2] == doctest::Approx(p[1]).epsilon(1e-12));
        CHECK(p[3] == doctest::Approx(p[1]).epsilon(1e-12));
        CHECK(p[4] != p[1]);
    }
}

TEST_CASE("rollout modes") {
    PolicyParams params = init_params(tiny_config(), 3);
    SUBCASE("every mode yields a feasible solution") {
        for (int seed = 0; seed < 20; ++seed) {
            Instance inst = env::random_instance(4 + seed, 9, 30, seed * 7 + 1);
            for (RolloutOptions opts :
                 {RolloutOptions{}, RolloutOptions{DecodeMode::Sample, 42, 1},
                  RolloutOptions{DecodeMode::Beam, 0, 3}}) {
                RolloutResult r = rollout(params, inst, opts);
                CHECK(validate(inst, r.solution).feasible());
                CHECK(r.solution.cost == doctest::Approx(r.cost));
            }
        }
    }
    SUBCASE("greedy is deterministic, sampling is seed-reproducible") {
        Instance inst = env::random_instance(12, 9, 30, 99);
        CHECK(rollout(params, inst).actions == rollout(params, inst).actions);
        RolloutOptions s1{DecodeMode::Sample, 7, 1};
        RolloutResult a = rollout(params, inst, s1);
        RolloutResult b = rollout(params, inst, s1);
        CHECK(a.actions == b.actions);
        CHECK(a.cost == b.cost);
        CHECK(a.log_prob == b.log_prob);
        RolloutOptions s2{DecodeMode::Sample, 8, 1};
        CHECK(rollout(params, inst, s2).actions != a.actions);
    }
    SUBCASE("beam(1) equals greedy exactly") {
        for (int seed = 0; seed < 10; ++seed) {
            Instance inst = env::random_instance(10, 9, 30, seed + 60);
            RolloutResult g = rollout(params, inst);
            RolloutResult b = rollout(params, inst, {DecodeMode::Beam, 0, 1});
            CHECK(g.actions == b.actions);
            CHECK(g.cost == b.cost);
        }
    }
    SUBCASE("beam cost is non-increasing in width") {
        for (int seed = 0; seed < 8; ++seed) {
            Instance inst = env::random_instance(12, 9, 30, seed + 70);
            double prev = 1e300;
            for (int w : {1, 2, 4, 8}) {
                double c = rollout(params, inst, {DecodeMode::Beam, 0, w}).cost;
                CHECK(c <= prev + 1e-9);
                prev = c;
            }
        }
    }
    SUBCASE("greedy cost is invariant to customer input order") {
        Instance a = env::random_instance(10, 9, 30, 123);
        Instance b = a;
        std::reverse(b.customers.begin(), b.customers.end());
        CHECK(rollout(params, a).cost == doctest::Approx(rollout(params, b).cost).epsilon(1e-9));
    }
    SUBCASE("teacher-forced log probability matches the decode-time value") {
        Instance inst = env::random_instance(11, 9, 30, 321);
        RolloutResult g = rollout(params, inst);
        Episode replay = evaluate_actions(params, inst, g.actions);
        CHECK(std::fabs(replay.log_prob - g.log_prob) <= 1e-9);
    }
    SUBCASE("serial and parallel batched rollouts agree bit-for-bit") {
        std::vector<Instance> batch;
        for (int i = 0; i < 16; ++i) batch.push_back(env::random_instance(9, 9, 30, i));
        CHECK(greedy_costs_serial(params, batch) == greedy_costs_parallel(params, batch));
    }
}

TEST_CASE("weight serialization") {
    PolicyParams params = init_params(tiny_config(), 4);
    const char* path = "/tmp/cvrp_test_weights.bin";
    SUBCASE("bit-exact round-trip") {
        save_weights(path, params);
        PolicyParams back = load_weights(path);
        CHECK(params_equal(params, back));
        CHECK(back.config.embedding_dim == params.config.embedding_dim);
        CHECK(back.config.problem == params.config.problem);
    }
    SUBCASE("rejects garbage") {
        std::FILE* f = std::fopen(path, "wb");
        std::fputs("not a weight file at all", f);
        std::fclose(f);
        CHECK_THROWS_AS(load_weights(path), WeightsError);
        CHECK_THROWS_AS(load_weights("/nonexistent/nowhere.bin"), WeightsError);
    }
    SUBCASE("sidecar text is written next to the weights") {
        save_weights(path, params);
        save_sidecar(path, train_config_to_json(TrainConfig{}));
        TrainConfig cfg = train_config_from_json([&] {
            std::ifstream in(std::string(path) + ".json");
            std::ostringstream s;
            s << in.rdbuf();
            return s.str();
        }());
        CHECK(cfg.model.embedding_dim == TrainConfig{}.model.embedding_dim);
    }
}

TEST_CASE("gradient check") {
    PolicyConfig tiny;
    tiny.embedding_dim = 8;
    tiny.encoder_layers = 1;
    tiny.num_heads = 2;
    tiny.ff_dim = 16;
    SUBCASE("analytic matches finite differences") {
        for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
            CAPTURE(seed);
            CHECK(gradient_check(tiny, seed) < 1e-3);
        }
    }
    SUBCASE("a corrupted gradient is detected") {
        CHECK(gradient_check(tiny, 1, /*corrupt=*/true) > 1e-2);
    }
    SUBCASE("zero advantage gives an exactly zero gradient") {
        PolicyParams params = init_params(tiny, 5);
        Instance inst = env::random_instance(4, 5, 10, 9);
        Episode ep = rollout_training(params, inst, 17, true);
        PolicyParams grad = zeros_like(params);
        backward_episode(params, *ep.cache, ep.enc, ep.steps, 0.0, grad);
        bool all_zero = true;
        grad.visit([&](const std::string&, const Mat& m) {
            for (double x : m.v) all_zero = all_zero && x == 0.0;
        });
        CHECK(all_zero);
    }
}

TEST_CASE("transfer initialization") {
    PolicyConfig tsp = tiny_config();
    tsp.problem = ProblemKind::Tsp;
    PolicyConfig cvrp = tiny_config();
    PolicyParams tsp_params = init_params(tsp, 6);
    SUBCASE("zero-initialized new rows keep the first-step distribution") {
        PolicyParams moved = transfer_init(tsp_params, cvrp, 7);
        // With Q far above total demand the demand/load features are the only
        // difference, and their projection rows are zero.
        Instance inst = env::random_instance(8, 1, 1000, 77);
        DistanceMatrix dist(inst);
        env::EnvState s = env::reset(inst, dist);
        env::ActionMask m = env::feasible_actions(s);
        Encoding et = encode(tsp_params, inst);
        Encoding ec = encode(moved, inst);
        std::vector<double> pt = decode_step(tsp_params, et, 0, 1.0, m);
        std::vector<double> pc = decode_step(moved, ec, 0, 1.0, m);
        for (size_t i = 0; i < pt.size(); ++i)
            CHECK(pc[i] == doctest::Approx(pt[i]).epsilon(1e-6));
    }
    SUBCASE("result is immediately usable and serializable") {
        PolicyParams moved = transfer_init(tsp_params, cvrp, 8);
        Instance inst = env::random_instance(6, 5, 15, 5);
        CHECK(validate(inst, rollout(moved, inst).solution).feasible());
        save_weights("/tmp/cvrp_test_transfer.bin", moved);
        CHECK(params_equal(moved, load_weights("/tmp/cvrp_test_transfer.bin")));
    }
    SUBCASE("embedding mismatch is a configuration error") {
        PolicyConfig wider = cvrp;
        wider.embedding_dim = 32;
        wider.num_heads = 4;
        CHECK_THROWS_AS(transfer_init(tsp_params, wider, 0), ConfigError);
    }
}

TEST_CASE("training mechanics") {
    TrainConfig cfg;
    cfg.model = tiny_config();
    cfg.batch_size = 4;
    cfg.epochs = 2;
    cfg.batches_per_epoch = 2;
    cfg.heldout_size = 8;
    cfg.n_customers = 6;
    cfg.seed = 13;
    SUBCASE("zero learning rate leaves parameters bit-identical") {
        cfg.learning_rate = 0.0;
        PolicyParams before = init_params(cfg.model, cfg.seed);
        TrainResult res = train_reinforce(cfg);
        CHECK(params_equal(before, res.params));
    }
    SUBCASE("curve rows are complete and ordered") {
        TrainResult res = train_reinforce(cfg);
        REQUIRE(res.curve.size() == 4);
        for (size_t i = 0; i < res.curve.size(); ++i) {
            CHECK(res.curve[i].epoch == static_cast<int>(i / 2));
            CHECK(res.curve[i].batch == static_cast<int>(i % 2));
            if (i > 0) CHECK(res.curve[i].wall_seconds >= res.curve[i - 1].wall_seconds);
        }
        CHECK(res.heldout_mean.size() == 2);
        // Round-trip through the CSV form.
        std::vector<CurveRow> back = parse_curve_csv(curve_csv(res.curve));
        REQUIRE(back.size() == res.curve.size());
        CHECK(back[3].epoch == res.curve[3].epoch);
        CHECK(back[3].mean_cost == doctest::Approx(res.curve[3].mean_cost));
    }
    SUBCASE("training is reproducible for a fixed seed") {
        TrainResult a = train_reinforce(cfg);
        TrainResult b = train_reinforce(cfg);
        CHECK(params_equal(a.params, b.params));
        CHECK(a.curve.back().mean_cost == b.curve.back().mean_cost);
    }
    SUBCASE("rollout baseline shrinks advantage spread below raw-return spread") {
        PolicyParams params = init_params(cfg.model, 21);
        std::vector<double> returns, advantages;
        for (int e = 0; e < 32; ++e) {
            Instance inst = env::random_instance(8, 9, 30, 900 + e);
            Episode ep = rollout_training(params, inst, 1000 + e, true);
            double ret = -ep.cost;
            double base = -rollout(params, inst).cost;  // frozen copy = same params
            returns.push_back(ret);
            advantages.push_back(ret - base);
        }
        auto stddev = [](const std::vector<double>& v) {
            double m = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
            double s = 0.0;
            for (double x : v) s += (x - m) * (x - m);
            return std::sqrt(s / v.size());
        };
        CHECK(stddev(advantages) <= stddev(returns));
    }
    SUBCASE("non-finite parameters abort with the tensor name") {
        PolicyParams bad = init_params(cfg.model, 1);
        bad.w_ctx.v[0] = std::numeric_limits<double>::quiet_NaN();
        TrainConfig c2 = cfg;
        c2.epochs = 1;
        CHECK_THROWS_WITH_AS(train_reinforce(c2, &bad), doctest::Contains("w_ctx"),
                             std::runtime_error);
    }
    SUBCASE("invalid configs are rejected") {
        TrainConfig c2 = cfg;
        c2.learning_rate = -1.0;
        CHECK_THROWS_AS(train_reinforce(c2), ConfigError);
        c2 = cfg;
        c2.model.embedding_dim = 0;
        CHECK_THROWS_AS(c2.check(), ConfigError);
        CHECK_THROWS_AS(train_config_from_json("{ nope"), ConfigError);
        CHECK_THROWS_AS(train_config_from_json("{\"baseline\": \"magic\"}"), ConfigError);
    }
}

TEST_CASE("plateau criterion") {
    std::vector<double> flat(20, 5.0);
    CHECK(plateau_epoch(flat) == 0);
    std::vector<double> late;
    for (int i = 0; i < 10; ++i) late.push_back(10.0 - i);  // epoch 9 reaches 1.0
    for (int i = 0; i < 12; ++i) late.push_back(1.0);
    CHECK(plateau_epoch(late) == 9);
    // A noisy tail cannot un-plateau: the best was found at epoch 2.
    CHECK(plateau_epoch({8.0, 6.0, 4.0, 4.1, 4.4, 4.02, 4.3}) == 2);
    CHECK(plateau_epoch({1.0, 2.0, 3.0}) == 0);  // never improved after the start
    CHECK(plateau_epoch({}) == -1);
}
