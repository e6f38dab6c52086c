#ifndef CVRP_POLICY_MODEL_HPP
#define CVRP_POLICY_MODEL_HPP

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "cvrp/env.hpp"
#include "cvrp/instance.hpp"
#include "cvrp/policy/tensor.hpp"

namespace cvrp::policy {

class ConfigError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class ProblemKind { Cvrp, Tsp };

struct PolicyConfig {
    int embedding_dim = 64;
    int encoder_layers = 3;
    int num_heads = 4;
    int ff_dim = 128;
    ProblemKind problem = ProblemKind::Cvrp;

    // Node features: x, y, depot flag, and for CVRP the scaled demand last
    // (so a TSP projection widens by appending rows).
    int feature_dim() const { return problem == ProblemKind::Cvrp ? 4 : 3; }
    int context_dim() const {
        return 2 * embedding_dim + (problem == ProblemKind::Cvrp ? 1 : 0);
    }
    void check() const;
};

struct LayerParams {
    Mat wq, wk, wv, wo;      // d x d
    Mat ln1_g, ln1_b;        // 1 x d
    Mat w1, b1;              // d x ff, 1 x ff
    Mat w2, b2;              // ff x d, 1 x d
    Mat ln2_g, ln2_b;        // 1 x d
};

// All weights theta. `visit` enumerates tensors in a fixed order shared by
// serialization, the optimizer and the gradient check.
struct PolicyParams {
    PolicyConfig config;
    Mat w_in, b_in;
    std::vector<LayerParams> layers;
    Mat w_ctx, b_ctx;  // context_dim x d, 1 x d
    Mat w_p;           // d x d pointer key projection
    Mat logit_clip;    // 1 x 1, learnable pointer logits scale

    template <typename F>
    void visit(F&& f) {
        f("w_in", w_in);
        f("b_in", b_in);
        for (size_t l = 0; l < layers.size(); ++l) {
            auto& L = layers[l];
            std::string p = "enc" + std::to_string(l) + ".";
            f(p + "wq", L.wq);
            f(p + "wk", L.wk);
            f(p + "wv", L.wv);
            f(p + "wo", L.wo);
            f(p + "ln1_g", L.ln1_g);
            f(p + "ln1_b", L.ln1_b);
            f(p + "w1", L.w1);
            f(p + "b1", L.b1);
            f(p + "w2", L.w2);
            f(p + "b2", L.b2);
            f(p + "ln2_g", L.ln2_g);
            f(p + "ln2_b", L.ln2_b);
        }
        f("w_ctx", w_ctx);
        f("b_ctx", b_ctx);
        f("w_p", w_p);
        f("logit_clip", logit_clip);
    }
    template <typename F>
    void visit(F&& f) const {
        const_cast<PolicyParams*>(this)->visit(
            [&](const std::string& name, Mat& m) { f(name, static_cast<const Mat&>(m)); });
    }

    bool finite() const;
};

// Uniform [-1/sqrt(fan_in), 1/sqrt(fan_in)] init; logit clip starts at 10.
PolicyParams init_params(const PolicyConfig& config, std::uint64_t seed);

// Zero-filled gradient accumulator matching `params` shapes.
PolicyParams zeros_like(const PolicyParams& params);

// Node features for the policy: generated instances pass through, benchmark
// coordinates are min-max scaled into the unit square (uniform scale),
// demands divided by capacity.
Mat node_features(const Instance& inst, const PolicyConfig& config);

// Per-instance encoder output, computed once per episode.
struct Encoding {
    Mat node_emb;   // N x d final encoder embeddings
    Mat graph_emb;  // 1 x d mean pooling
    Mat keys;       // N x d pointer keys (node_emb * w_p)
};

struct EncoderCache;  // opaque, carries activations for backward

Encoding encode(const PolicyParams& params, const Instance& inst);
Encoding encode_cached(const PolicyParams& params, const Instance& inst,
                       std::shared_ptr<EncoderCache>& cache);

struct StepCache {
    Mat context;  // 1 x context_dim
    Mat query;    // 1 x d
    std::vector<double> dots, tanhs, probs;
    std::vector<char> mask;
    int current_node = 0;
    int action = -1;
};

// Probability distribution over nodes for one decoding step. Masked nodes get
// a -1e9 logit offset so their probability underflows to zero.
std::vector<double> decode_step(const PolicyParams& params, const Encoding& enc,
                                int current_node, double load_fraction,
                                const env::ActionMask& mask,
                                StepCache* cache = nullptr);

// Backward pass for -coef * sum_t log pi(a_t) through decoder and encoder.
// The step caches must carry the chosen actions.
void backward_episode(const PolicyParams& params, const EncoderCache& enc_cache,
                      const Encoding& enc, std::vector<StepCache>& steps, double coef,
                      PolicyParams& grad);

}  // namespace cvrp::policy

#endif
