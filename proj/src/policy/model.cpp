#include "cvrp/policy/model.hpp"

#include <algorithm>
#include <cmath>

namespace cvrp::policy {

namespace {

constexpr double kLnEps = 1e-8;
constexpr double kMaskOffset = -1e9;

struct Rng {
    std::uint64_t state;
    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
};

void init_uniform(Mat& m, int fan_in, Rng& rng) {
    double bound = 1.0 / std::sqrt(static_cast<double>(std::max(1, fan_in)));
    for (double& x : m.v) x = (2.0 * rng.uniform() - 1.0) * bound;
}

struct LnCache {
    Mat xhat;
    std::vector<double> invstd;
};

void layer_norm(const Mat& x, const Mat& g, const Mat& b, Mat& out, LnCache& cache) {
    int d = x.cols;
    out = Mat(x.rows, d);
    cache.xhat = Mat(x.rows, d);
    cache.invstd.resize(x.rows);
    for (int r = 0; r < x.rows; ++r) {
        const double* row = x.row(r);
        double mean = 0.0;
        for (int j = 0; j < d; ++j) mean += row[j];
        mean /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) var += (row[j] - mean) * (row[j] - mean);
        var /= d;
        double inv = 1.0 / std::sqrt(var + kLnEps);
        cache.invstd[r] = inv;
        for (int j = 0; j < d; ++j) {
            double xh = (row[j] - mean) * inv;
            cache.xhat.at(r, j) = xh;
            out.at(r, j) = xh * g.v[j] + b.v[j];
        }
    }
}

void layer_norm_backward(const Mat& dy, const Mat& g, const LnCache& cache, Mat& dx,
                         Mat& dg, Mat& db) {
    int d = dy.cols;
    dx = Mat(dy.rows, d);
    for (int r = 0; r < dy.rows; ++r) {
        const double* dyr = dy.row(r);
        const double* xh = cache.xhat.row(r);
        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        for (int j = 0; j < d; ++j) {
            dg.v[j] += dyr[j] * xh[j];
            db.v[j] += dyr[j];
            double dxh = dyr[j] * g.v[j];
            sum_dxhat += dxh;
            sum_dxhat_xhat += dxh * xh[j];
        }
        double inv = cache.invstd[r];
        for (int j = 0; j < d; ++j) {
            double dxh = dyr[j] * g.v[j];
            dx.at(r, j) = inv * (dxh - sum_dxhat / d - xh[j] * sum_dxhat_xhat / d);
        }
    }
}

void softmax_rows(Mat& m) {
    for (int r = 0; r < m.rows; ++r) {
        double* row = m.row(r);
        double mx = row[0];
        for (int j = 1; j < m.cols; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (int j = 0; j < m.cols; ++j) {
            row[j] = std::exp(row[j] - mx);
            sum += row[j];
        }
        for (int j = 0; j < m.cols; ++j) row[j] /= sum;
    }
}

struct LayerCache {
    Mat input;
    Mat q, k, v;            // N x d, all heads side by side
    std::vector<Mat> attn;  // per head, N x N
    Mat z;                  // N x d concatenated head outputs
    Mat r1;
    LnCache ln1;
    Mat h1;
    Mat f1pre, f1;
    LnCache ln2;
    Mat out;
};

void encoder_layer_forward(const PolicyParams& p, const LayerParams& L, const Mat& input,
                           LayerCache& c) {
    const int n = input.rows;
    const int d = input.cols;
    const int heads = p.config.num_heads;
    const int dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    c.input = input;
    matmul(input, L.wq, c.q);
    matmul(input, L.wk, c.k);
    matmul(input, L.wv, c.v);
    c.attn.assign(heads, Mat());
    c.z = Mat(n, d);
    for (int h = 0; h < heads; ++h) {
        int off = h * dh;
        Mat& attn = c.attn[h];
        attn = Mat(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double s = 0.0;
                for (int t = 0; t < dh; ++t) s += c.q.at(i, off + t) * c.k.at(j, off + t);
                attn.at(i, j) = s * scale;
            }
        softmax_rows(attn);
        for (int i = 0; i < n; ++i)
            for (int t = 0; t < dh; ++t) {
                double s = 0.0;
                for (int j = 0; j < n; ++j) s += attn.at(i, j) * c.v.at(j, off + t);
                c.z.at(i, off + t) = s;
            }
    }
    Mat a;
    matmul(c.z, L.wo, a);
    c.r1 = input;
    c.r1 += a;
    layer_norm(c.r1, L.ln1_g, L.ln1_b, c.h1, c.ln1);

    matmul(c.h1, L.w1, c.f1pre);
    add_bias_rows(c.f1pre, L.b1);
    c.f1 = c.f1pre;
    for (double& x : c.f1.v) x = std::max(0.0, x);
    Mat f2;
    matmul(c.f1, L.w2, f2);
    add_bias_rows(f2, L.b2);
    Mat r2 = c.h1;
    r2 += f2;
    layer_norm(r2, L.ln2_g, L.ln2_b, c.out, c.ln2);
}

// Returns gradient w.r.t. the layer input.
Mat encoder_layer_backward(const PolicyParams& p, const LayerParams& L, const LayerCache& c,
                           const Mat& dout, LayerParams& gL) {
    const int n = c.input.rows;
    const int d = c.input.cols;
    const int heads = p.config.num_heads;
    const int dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Mat dr2;
    layer_norm_backward(dout, L.ln2_g, c.ln2, dr2, gL.ln2_g, gL.ln2_b);
    Mat dh1 = dr2;  // residual branch
    // FF branch.
    add_matmul_tn(c.f1, dr2, gL.w2);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) gL.b2.v[j] += dr2.at(i, j);
    Mat df1;
    matmul_nt(dr2, L.w2, df1);
    for (size_t i = 0; i < df1.v.size(); ++i)
        if (c.f1pre.v[i] <= 0.0) df1.v[i] = 0.0;
    add_matmul_tn(c.h1, df1, gL.w1);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < df1.cols; ++j) gL.b1.v[j] += df1.at(i, j);
    Mat dtmp;
    matmul_nt(df1, L.w1, dtmp);
    dh1 += dtmp;

    Mat dr1;
    layer_norm_backward(dh1, L.ln1_g, c.ln1, dr1, gL.ln1_g, gL.ln1_b);
    Mat dinput = dr1;  // residual branch

    // Attention branch: dA = dr1.
    add_matmul_tn(c.z, dr1, gL.wo);
    Mat dz;
    matmul_nt(dr1, L.wo, dz);
    Mat dq(n, d), dk(n, d), dv(n, d);
    for (int h = 0; h < heads; ++h) {
        int off = h * dh;
        const Mat& attn = c.attn[h];
        // dattn and dV.
        Mat dattn(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double s = 0.0;
                for (int t = 0; t < dh; ++t) s += dz.at(i, off + t) * c.v.at(j, off + t);
                dattn.at(i, j) = s;
            }
        for (int j = 0; j < n; ++j)
            for (int t = 0; t < dh; ++t) {
                double s = 0.0;
                for (int i = 0; i < n; ++i) s += attn.at(i, j) * dz.at(i, off + t);
                dv.at(j, off + t) = s;
            }
        // Softmax backward per row, then scores -> q, k.
        for (int i = 0; i < n; ++i) {
            double dot = 0.0;
            for (int j = 0; j < n; ++j) dot += attn.at(i, j) * dattn.at(i, j);
            for (int j = 0; j < n; ++j) {
                double dscore = attn.at(i, j) * (dattn.at(i, j) - dot) * scale;
                for (int t = 0; t < dh; ++t) {
                    dq.at(i, off + t) += dscore * c.k.at(j, off + t);
                    dk.at(j, off + t) += dscore * c.q.at(i, off + t);
                }
            }
        }
    }
    add_matmul_tn(c.input, dq, gL.wq);
    add_matmul_tn(c.input, dk, gL.wk);
    add_matmul_tn(c.input, dv, gL.wv);
    Mat t1;
    matmul_nt(dq, L.wq, t1);
    dinput += t1;
    matmul_nt(dk, L.wk, t1);
    dinput += t1;
    matmul_nt(dv, L.wv, t1);
    dinput += t1;
    return dinput;
}

}  // namespace

struct EncoderCache {
    Mat x;
    Mat h0;
    std::vector<LayerCache> layers;
    double capacity = 1.0;
};

void PolicyConfig::check() const {
    if (embedding_dim <= 0 || encoder_layers < 0 || num_heads <= 0 || ff_dim <= 0)
        throw ConfigError("policy config dimensions must be positive");
    if (embedding_dim % num_heads != 0)
        throw ConfigError("embedding_dim must be divisible by num_heads");
}

bool PolicyParams::finite() const {
    bool ok = true;
    visit([&](const std::string&, const Mat& m) { ok = ok && all_finite(m); });
    return ok;
}

PolicyParams init_params(const PolicyConfig& config, std::uint64_t seed) {
    config.check();
    const int d = config.embedding_dim;
    PolicyParams p;
    p.config = config;
    p.w_in = Mat(config.feature_dim(), d);
    p.b_in = Mat(1, d);
    p.layers.resize(config.encoder_layers);
    for (auto& L : p.layers) {
        L.wq = L.wk = L.wv = L.wo = Mat(d, d);
        L.ln1_g = L.ln1_b = L.ln2_g = L.ln2_b = Mat(1, d);
        L.w1 = Mat(d, config.ff_dim);
        L.b1 = Mat(1, config.ff_dim);
        L.w2 = Mat(config.ff_dim, d);
        L.b2 = Mat(1, d);
    }
    p.w_ctx = Mat(config.context_dim(), d);
    p.b_ctx = Mat(1, d);
    p.w_p = Mat(d, d);
    p.logit_clip = Mat(1, 1);

    Rng rng{seed ^ 0xabcdef1234567890ULL};
    p.visit([&](const std::string& name, Mat& m) {
        if (name.find("ln") != std::string::npos) {
            // Normalization gains start at 1, offsets at 0.
            bool gain = name.find("_g") != std::string::npos;
            for (double& x : m.v) x = gain ? 1.0 : 0.0;
        } else if (name == "logit_clip") {
            m.v[0] = 10.0;
        } else if (m.rows == 1) {
            m.zero();  // biases
        } else {
            init_uniform(m, m.rows, rng);
        }
    });
    return p;
}

PolicyParams zeros_like(const PolicyParams& params) {
    PolicyParams g = params;
    g.visit([](const std::string&, Mat& m) { m.zero(); });
    return g;
}

Mat node_features(const Instance& inst, const PolicyConfig& config) {
    const int n = inst.num_customers();
    Mat x(n + 1, config.feature_dim());
    double minx = inst.depot.x, maxx = inst.depot.x;
    double miny = inst.depot.y, maxy = inst.depot.y;
    for (int i = 1; i <= n; ++i) {
        Point p = inst.node_pos(i);
        minx = std::min(minx, p.x);
        maxx = std::max(maxx, p.x);
        miny = std::min(miny, p.y);
        maxy = std::max(maxy, p.y);
    }
    bool rescale = minx < 0.0 || miny < 0.0 || maxx > 1.0 || maxy > 1.0;
    double span = std::max(maxx - minx, maxy - miny);
    if (span <= 0.0) span = 1.0;
    for (int i = 0; i <= n; ++i) {
        Point p = inst.node_pos(i);
        double px = rescale ? (p.x - minx) / span : p.x;
        double py = rescale ? (p.y - miny) / span : p.y;
        x.at(i, 0) = px;
        x.at(i, 1) = py;
        x.at(i, 2) = i == 0 ? 1.0 : 0.0;
        if (config.problem == ProblemKind::Cvrp)
            x.at(i, 3) = inst.demand(i) / inst.capacity;
    }
    return x;
}

Encoding encode_cached(const PolicyParams& params, const Instance& inst,
                       std::shared_ptr<EncoderCache>& cache) {
    params.config.check();
    cache = std::make_shared<EncoderCache>();
    cache->capacity = inst.capacity;
    cache->x = node_features(inst, params.config);
    if (cache->x.cols != params.w_in.rows)
        throw ConfigError("feature width does not match the input projection");

    matmul(cache->x, params.w_in, cache->h0);
    add_bias_rows(cache->h0, params.b_in);

    const Mat* h = &cache->h0;
    cache->layers.resize(params.layers.size());
    for (size_t l = 0; l < params.layers.size(); ++l) {
        encoder_layer_forward(params, params.layers[l], *h, cache->layers[l]);
        h = &cache->layers[l].out;
    }

    Encoding enc;
    enc.node_emb = *h;
    enc.graph_emb = Mat(1, enc.node_emb.cols);
    for (int i = 0; i < enc.node_emb.rows; ++i)
        for (int j = 0; j < enc.node_emb.cols; ++j)
            enc.graph_emb.v[j] += enc.node_emb.at(i, j) / enc.node_emb.rows;
    matmul(enc.node_emb, params.w_p, enc.keys);
    return enc;
}

Encoding encode(const PolicyParams& params, const Instance& inst) {
    std::shared_ptr<EncoderCache> cache;
    return encode_cached(params, inst, cache);
}

std::vector<double> decode_step(const PolicyParams& params, const Encoding& enc,
                                int current_node, double load_fraction,
                                const env::ActionMask& mask, StepCache* cache) {
    const int n_nodes = enc.node_emb.rows;
    const int d = enc.node_emb.cols;
    bool any = false;
    for (char a : mask.allowed) any = any || a;
    if (!any) throw std::logic_error("decode_step: mask allows no action");

    Mat ctx(1, params.config.context_dim());
    for (int j = 0; j < d; ++j) ctx.v[j] = enc.graph_emb.v[j];
    for (int j = 0; j < d; ++j) ctx.v[d + j] = enc.node_emb.at(current_node, j);
    if (params.config.problem == ProblemKind::Cvrp) ctx.v[2 * d] = load_fraction;

    Mat q;
    matmul(ctx, params.w_ctx, q);
    add_bias_rows(q, params.b_ctx);

    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    const double clip = params.logit_clip.v[0];
    std::vector<double> dots(n_nodes), tanhs(n_nodes), logits(n_nodes);
    for (int i = 0; i < n_nodes; ++i) {
        double s = 0.0;
        for (int j = 0; j < d; ++j) s += q.v[j] * enc.keys.at(i, j);
        dots[i] = s * scale;
        tanhs[i] = std::tanh(dots[i]);
        logits[i] = clip * tanhs[i] + (mask.is_allowed(i) ? 0.0 : kMaskOffset);
    }
    double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    std::vector<double> probs(n_nodes);
    for (int i = 0; i < n_nodes; ++i) {
        probs[i] = std::exp(logits[i] - mx);
        sum += probs[i];
    }
    for (double& p : probs) p /= sum;

    if (cache) {
        cache->context = std::move(ctx);
        cache->query = std::move(q);
        cache->dots = std::move(dots);
        cache->tanhs = std::move(tanhs);
        cache->probs = probs;
        cache->mask = mask.allowed;
        cache->current_node = current_node;
    }
    return probs;
}

void backward_episode(const PolicyParams& params, const EncoderCache& enc_cache,
                      const Encoding& enc, std::vector<StepCache>& steps, double coef,
                      PolicyParams& grad) {
    const int n_nodes = enc.node_emb.rows;
    const int d = enc.node_emb.cols;
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    const double clip = params.logit_clip.v[0];

    Mat dnode(n_nodes, d);
    Mat dkeys(n_nodes, d);
    Mat dgraph(1, d);

    for (StepCache& st : steps) {
        std::vector<double> dlogit(n_nodes);
        for (int i = 0; i < n_nodes; ++i)
            dlogit[i] = coef * (st.probs[i] - (i == st.action ? 1.0 : 0.0));
        Mat dq(1, d);
        for (int i = 0; i < n_nodes; ++i) {
            grad.logit_clip.v[0] += dlogit[i] * st.tanhs[i];
            double du = dlogit[i] * clip * (1.0 - st.tanhs[i] * st.tanhs[i]);
            if (du == 0.0) continue;
            for (int j = 0; j < d; ++j) {
                dq.v[j] += du * enc.keys.at(i, j) * scale;
                dkeys.at(i, j) += du * st.query.v[j] * scale;
            }
        }
        add_matmul_tn(st.context, dq, grad.w_ctx);
        grad.b_ctx += dq;
        Mat dctx;
        matmul_nt(dq, params.w_ctx, dctx);
        for (int j = 0; j < d; ++j) {
            dgraph.v[j] += dctx.v[j];
            dnode.at(st.current_node, j) += dctx.v[d + j];
        }
    }

    // keys = node_emb * w_p
    add_matmul_tn(enc.node_emb, dkeys, grad.w_p);
    Mat t;
    matmul_nt(dkeys, params.w_p, t);
    dnode += t;
    // graph_emb = mean of node embeddings
    for (int i = 0; i < n_nodes; ++i)
        for (int j = 0; j < d; ++j) dnode.at(i, j) += dgraph.v[j] / n_nodes;

    Mat dh = dnode;
    for (size_t l = params.layers.size(); l-- > 0;)
        dh = encoder_layer_backward(params, params.layers[l], enc_cache.layers[l], dh,
                                    grad.layers[l]);

    add_matmul_tn(enc_cache.x, dh, grad.w_in);
    for (int i = 0; i < dh.rows; ++i)
        for (int j = 0; j < dh.cols; ++j) grad.b_in.v[j] += dh.at(i, j);
}

}  // namespace cvrp::policy
