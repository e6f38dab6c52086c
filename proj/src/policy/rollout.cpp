#include "cvrp/policy/rollout.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cvrp::policy {

namespace {

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

int argmax_action(const std::vector<double>& probs, const env::ActionMask& mask) {
    int best = -1;
    double best_p = -1.0;
    for (size_t i = 0; i < probs.size(); ++i)
        if (mask.is_allowed(static_cast<int>(i)) && probs[i] > best_p) {
            best_p = probs[i];
            best = static_cast<int>(i);
        }
    if (best < 0)  // non-finite probabilities compare false everywhere
        for (size_t i = 0; i < probs.size(); ++i)
            if (mask.is_allowed(static_cast<int>(i))) return static_cast<int>(i);
    return best;
}

int sample_action(const std::vector<double>& probs, const env::ActionMask& mask, Rng& rng) {
    double u = rng.uniform();
    double acc = 0.0;
    int last_allowed = -1;
    for (size_t i = 0; i < probs.size(); ++i) {
        if (!mask.is_allowed(static_cast<int>(i))) continue;
        last_allowed = static_cast<int>(i);
        acc += probs[i];
        if (u < acc) return last_allowed;
    }
    return last_allowed;  // guards against rounding in the cumulative sum
}

int step_bound(const Instance& inst) { return 3 * inst.num_customers() + 2; }

Episode run_episode(const PolicyParams& params, const Instance& inst, bool sample,
                    std::uint64_t seed, const std::vector<int>* forced) {
    Episode ep;
    ep.enc = encode_cached(params, inst, ep.cache);
    DistanceMatrix dist(inst);
    env::EnvState s = env::reset(inst, dist);
    Rng rng{seed ^ 0x5bf03635f0a5a1a3ULL};
    const double cap = inst.capacity;
    for (int t = 0; t < step_bound(inst); ++t) {
        env::ActionMask mask = env::feasible_actions(s);
        StepCache st;
        std::vector<double> probs =
            decode_step(params, ep.enc, s.current_node, s.truck_load / cap, mask, &st);
        int a;
        if (forced) {
            if (t >= static_cast<int>(forced->size()))
                throw std::logic_error("evaluate_actions: sequence ends before the episode");
            a = (*forced)[t];
        } else {
            a = sample ? sample_action(probs, mask, rng) : argmax_action(probs, mask);
        }
        st.action = a;
        ep.log_prob += std::log(probs[a]);
        ep.steps.push_back(std::move(st));
        ep.actions.push_back(a);
        auto [next, terminal] = env::step(s, a);
        s = std::move(next);
        if (terminal) break;
        if (forced && t + 1 == static_cast<int>(forced->size()))
            return ep;  // partial teacher-forced replay is allowed
    }
    if (!forced && !s.terminal())
        throw std::logic_error("rollout: episode did not terminate within the step bound");
    ep.cost = s.distance_so_far;
    return ep;
}

struct BeamItem {
    env::EnvState state;
    std::vector<int> actions;
    double logp = 0.0;
    bool finished = false;
};

RolloutResult beam_search(const PolicyParams& params, const Instance& inst, int width) {
    if (width < 1) throw std::invalid_argument("beam width must be >= 1");
    Encoding enc = encode(params, inst);
    DistanceMatrix dist(inst);
    const double cap = inst.capacity;

    std::vector<BeamItem> items(1);
    items[0].state = env::reset(inst, dist);

    bool have_best = false;
    RolloutResult best;

    struct Cand {
        double logp;
        int parent;
        int action;  // -1 keeps a finished item alive
        bool used = false;
    };

    for (int t = 0; t < step_bound(inst); ++t) {
        bool all_done = true;
        for (const BeamItem& it : items) all_done = all_done && it.finished;
        if (all_done) break;

        std::vector<Cand> cands;
        for (int p = 0; p < static_cast<int>(items.size()); ++p) {
            const BeamItem& it = items[p];
            if (it.finished) {
                cands.push_back({it.logp, p, -1});
                continue;
            }
            env::ActionMask mask = env::feasible_actions(it.state);
            std::vector<double> probs = decode_step(
                params, enc, it.state.current_node, it.state.truck_load / cap, mask);
            for (int a = 0; a < static_cast<int>(probs.size()); ++a)
                if (mask.is_allowed(a))
                    cands.push_back({it.logp + std::log(probs[a]), p, a});
        }
        std::sort(cands.begin(), cands.end(), [](const Cand& x, const Cand& y) {
            if (x.logp != y.logp) return x.logp > y.logp;
            if (x.parent != y.parent) return x.parent < y.parent;
            return x.action < y.action;
        });

        // Slot j may only draw on parents in slots <= j, so the first W-1
        // slots evolve exactly as a beam of width W-1 would: widening the
        // beam only ever adds sequences.
        std::vector<BeamItem> next;
        for (int slot = 0; slot < width; ++slot) {
            Cand* pick = nullptr;
            for (Cand& c : cands)
                if (!c.used && c.parent <= slot) {
                    pick = &c;
                    break;
                }
            if (!pick) break;  // candidates exhausted; later slots are empty too
            pick->used = true;
            const BeamItem& parent = items[pick->parent];
            BeamItem child;
            if (pick->action < 0) {
                child = parent;
            } else {
                auto [ns, terminal] = env::step(parent.state, pick->action);
                child.state = std::move(ns);
                child.actions = parent.actions;
                child.actions.push_back(pick->action);
                child.logp = pick->logp;
                child.finished = terminal;
                if (terminal) {
                    double cost = child.state.distance_so_far;
                    if (!have_best || cost < best.cost) {
                        have_best = true;
                        best.actions = child.actions;
                        best.cost = cost;
                        best.log_prob = child.logp;
                    }
                }
            }
            next.push_back(std::move(child));
        }
        items = std::move(next);
    }
    if (!have_best) throw std::logic_error("beam search found no completed episode");
    best.solution.routes = env::routes_from_episode(best.actions);
    best.solution.cost = best.cost;
    return best;
}

}  // namespace

RolloutResult rollout(const PolicyParams& params, const Instance& inst,
                      const RolloutOptions& opts) {
    if (opts.mode == DecodeMode::Beam) return beam_search(params, inst, opts.beam_width);
    Episode ep = run_episode(params, inst, opts.mode == DecodeMode::Sample, opts.seed, nullptr);
    RolloutResult r;
    r.actions = std::move(ep.actions);
    r.cost = ep.cost;
    r.log_prob = ep.log_prob;
    r.solution.routes = env::routes_from_episode(r.actions);
    r.solution.cost = r.cost;
    return r;
}

Episode rollout_training(const PolicyParams& params, const Instance& inst,
                         std::uint64_t seed, bool sample) {
    return run_episode(params, inst, sample, seed, nullptr);
}

Episode evaluate_actions(const PolicyParams& params, const Instance& inst,
                         const std::vector<int>& actions) {
    return run_episode(params, inst, false, 0, &actions);
}

std::vector<double> greedy_costs_serial(const PolicyParams& params,
                                        const std::vector<Instance>& batch) {
    std::vector<double> costs(batch.size());
    for (size_t i = 0; i < batch.size(); ++i) costs[i] = rollout(params, batch[i]).cost;
    return costs;
}

std::vector<double> greedy_costs_parallel(const PolicyParams& params,
                                          const std::vector<Instance>& batch) {
    std::vector<double> costs(batch.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (size_t i = 0; i < batch.size(); ++i) costs[i] = rollout(params, batch[i]).cost;
    return costs;
}

}  // namespace cvrp::policy
