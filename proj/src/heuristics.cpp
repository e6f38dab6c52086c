#include "cvrp/heuristics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

namespace cvrp::heur {

namespace {

constexpr double kImproveTol = 1e-9;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Move {
    enum Type { TwoOpt, OrOpt, Relocate, Swap, TwoOptStar, None };
    Type type = None;
    double delta = 0.0;
    int r1 = -1, p1 = -1, r2 = -1, p2 = -1, len = 1;
};

// Shared search state for plain descent and the GLS-penalized descent.
class Searcher {
public:
    Searcher(const Instance& inst, const DistanceMatrix& dist, int neighbor_limit,
             std::uint64_t seed)
        : inst_(inst), dist_(dist), n_(inst.num_customers()), rng_(seed ^ 0x9e3779b97f4a7c15ULL) {
        use_candidates_ = n_ > 30 && neighbor_limit > 0;
        if (use_candidates_) build_neighbors(neighbor_limit);
        pen_.assign(static_cast<size_t>(n_ + 1) * (n_ + 1), 0);
    }

    void set_penalty_weight(double lambda) { lambda_ = lambda; }

    void load(const Solution& sol) {
        routes_.clear();
        for (const Route& r : sol.routes)
            if (!r.empty()) routes_.push_back(r);
        refresh_demands();
    }

    Solution snapshot() const {
        Solution sol;
        sol.routes = routes_;
        sol.cost = solution_cost(dist_, routes_);
        return sol;
    }

    double true_cost() const { return solution_cost(dist_, routes_); }

    // Runs best-improvement descent on the (possibly penalized) objective.
    // Returns the number of moves applied.
    long descend(double deadline_s, Clock::time_point t0, long max_moves) {
        long applied = 0;
        while (true) {
            if (max_moves > 0 && applied >= max_moves) break;
            if (max_moves <= 0 && seconds_since(t0) > deadline_s) break;
            Move m = best_move();
            if (m.type == Move::None) break;
            apply(m);
            ++applied;
        }
        return applied;
    }

    // Increments the penalty of every solution edge of maximal utility
    // c_ij / (1 + p_ij).
    void penalize_max_utility() {
        double best = -1.0;
        for_each_edge([&](int a, int b) {
            double u = dist_(a, b) / (1.0 + pen(a, b));
            best = std::max(best, u);
        });
        if (best <= 0.0) return;
        for_each_edge([&](int a, int b) {
            double u = dist_(a, b) / (1.0 + pen(a, b));
            if (u > best - 1e-12) {
                ++pen_[a * (n_ + 1) + b];
                ++pen_[b * (n_ + 1) + a];
            }
        });
    }

private:
    const Instance& inst_;
    const DistanceMatrix& dist_;
    int n_;
    bool use_candidates_ = false;
    std::vector<std::vector<int>> knn_;
    std::vector<Route> routes_;
    std::vector<double> route_demand_;
    std::vector<int> pen_;
    double lambda_ = 0.0;
    std::mt19937_64 rng_;

    int pen(int a, int b) const { return pen_[a * (n_ + 1) + b]; }

    double pc(int a, int b) const {
        double c = dist_(a, b);
        return lambda_ == 0.0 ? c : c + lambda_ * pen(a, b);
    }

    void build_neighbors(int limit) {
        knn_.assign(n_ + 1, {});
        std::vector<int> order(n_);
        for (int v = 1; v <= n_; ++v) {
            std::iota(order.begin(), order.end(), 1);
            order.erase(std::find(order.begin(), order.end(), v));
            std::sort(order.begin(), order.end(), [&](int a, int b) {
                double da = dist_(v, a), db = dist_(v, b);
                return da != db ? da < db : a < b;
            });
            order.resize(std::min<size_t>(order.size(), limit));
            knn_[v] = order;
            order.resize(n_);
        }
    }

    void refresh_demands() {
        route_demand_.assign(routes_.size(), 0.0);
        for (size_t r = 0; r < routes_.size(); ++r)
            for (int v : routes_[r]) route_demand_[r] += inst_.demand(v);
    }

    int node(int r, int idx) const {
        const Route& rt = routes_[r];
        if (idx < 0 || idx >= static_cast<int>(rt.size())) return 0;
        return rt[idx];
    }

    template <typename F>
    void for_each_edge(F&& f) const {
        for (const Route& r : routes_) {
            int prev = 0;
            for (int v : r) {
                f(prev, v);
                prev = v;
            }
            f(prev, 0);
        }
    }

    void consider(Move& best, Move cand) {
        if (cand.delta < best.delta - kImproveTol) {
            best = cand;
        } else if (cand.delta < best.delta + kImproveTol && best.type != Move::None) {
            // Seeded tie-break keeps distinct seeds from tracing identical paths.
            if ((rng_() & 1) == 0) best = cand;
        }
    }

    Move best_move() {
        for (auto scan : {&Searcher::scan_two_opt, &Searcher::scan_or_opt,
                          &Searcher::scan_relocate, &Searcher::scan_swap,
                          &Searcher::scan_two_opt_star}) {
            Move best;
            best.delta = -kImproveTol;
            (this->*scan)(best);
            if (best.type != Move::None) return best;
        }
        return {};
    }

    void scan_two_opt(Move& best) {
        for (size_t r = 0; r < routes_.size(); ++r) {
            int m = static_cast<int>(routes_[r].size());
            for (int p = 0; p < m - 1; ++p) {
                for (int q = p + 1; q < m; ++q) {
                    double delta = pc(node(r, p - 1), node(r, q)) +
                                   pc(node(r, p), node(r, q + 1)) -
                                   pc(node(r, p - 1), node(r, p)) -
                                   pc(node(r, q), node(r, q + 1));
                    if (delta < -kImproveTol)
                        consider(best, {Move::TwoOpt, delta, static_cast<int>(r), p,
                                        static_cast<int>(r), q, 0});
                }
            }
        }
    }

    void scan_or_opt(Move& best) {
        for (size_t r = 0; r < routes_.size(); ++r) {
            int m = static_cast<int>(routes_[r].size());
            for (int len = 1; len <= 3; ++len) {
                for (int p = 0; p + len <= m; ++p) {
                    int first = node(r, p), last = node(r, p + len - 1);
                    double gain = pc(node(r, p - 1), first) + pc(last, node(r, p + len)) -
                                  pc(node(r, p - 1), node(r, p + len));
                    for (int q = -1; q < m; ++q) {
                        if (q >= p - 1 && q < p + len) continue;
                        double add = pc(node(r, q), first) + pc(last, node(r, q + 1)) -
                                     pc(node(r, q), node(r, q + 1));
                        double delta = add - gain;
                        if (delta < -kImproveTol)
                            consider(best, {Move::OrOpt, delta, static_cast<int>(r), p,
                                            static_cast<int>(r), q, len});
                    }
                }
            }
        }
    }

    bool near(int v, int w) const {
        if (!use_candidates_) return true;
        const auto& nb = knn_[v];
        return std::find(nb.begin(), nb.end(), w) != nb.end();
    }

    void scan_relocate(Move& best) {
        for (size_t r1 = 0; r1 < routes_.size(); ++r1) {
            int m1 = static_cast<int>(routes_[r1].size());
            for (int p = 0; p < m1; ++p) {
                int v = routes_[r1][p];
                double gain = pc(node(r1, p - 1), v) + pc(v, node(r1, p + 1)) -
                              pc(node(r1, p - 1), node(r1, p + 1));
                for (size_t r2 = 0; r2 < routes_.size(); ++r2) {
                    if (r2 == r1) continue;
                    if (route_demand_[r2] + inst_.demand(v) > inst_.capacity) continue;
                    int m2 = static_cast<int>(routes_[r2].size());
                    for (int q = -1; q < m2; ++q) {
                        int a = node(r2, q), b = node(r2, q + 1);
                        if (use_candidates_ && !(a && near(v, a)) && !(b && near(v, b)))
                            continue;
                        double delta = pc(a, v) + pc(v, b) - pc(a, b) - gain;
                        if (delta < -kImproveTol)
                            consider(best, {Move::Relocate, delta, static_cast<int>(r1), p,
                                            static_cast<int>(r2), q, 1});
                    }
                }
            }
        }
    }

    void scan_swap(Move& best) {
        for (size_t r1 = 0; r1 < routes_.size(); ++r1) {
            for (int p = 0; p < static_cast<int>(routes_[r1].size()); ++p) {
                int v = routes_[r1][p];
                for (size_t r2 = r1 + 1; r2 < routes_.size(); ++r2) {
                    for (int q = 0; q < static_cast<int>(routes_[r2].size()); ++q) {
                        int w = routes_[r2][q];
                        if (use_candidates_ && !near(v, w)) continue;
                        if (route_demand_[r1] - inst_.demand(v) + inst_.demand(w) >
                                inst_.capacity ||
                            route_demand_[r2] - inst_.demand(w) + inst_.demand(v) >
                                inst_.capacity)
                            continue;
                        double delta = pc(node(r1, p - 1), w) + pc(w, node(r1, p + 1)) -
                                       pc(node(r1, p - 1), v) - pc(v, node(r1, p + 1)) +
                                       pc(node(r2, q - 1), v) + pc(v, node(r2, q + 1)) -
                                       pc(node(r2, q - 1), w) - pc(w, node(r2, q + 1));
                        if (delta < -kImproveTol)
                            consider(best, {Move::Swap, delta, static_cast<int>(r1), p,
                                            static_cast<int>(r2), q, 1});
                    }
                }
            }
        }
    }

    void scan_two_opt_star(Move& best) {
        // Tail exchange between two routes; prefix demand sums are cheap to
        // rebuild per scan.
        std::vector<std::vector<double>> prefix(routes_.size());
        for (size_t r = 0; r < routes_.size(); ++r) {
            prefix[r].resize(routes_[r].size() + 1, 0.0);
            for (size_t k = 0; k < routes_[r].size(); ++k)
                prefix[r][k + 1] = prefix[r][k] + inst_.demand(routes_[r][k]);
        }
        for (size_t r1 = 0; r1 < routes_.size(); ++r1) {
            int m1 = static_cast<int>(routes_[r1].size());
            for (size_t r2 = r1 + 1; r2 < routes_.size(); ++r2) {
                int m2 = static_cast<int>(routes_[r2].size());
                for (int p = -1; p < m1; ++p) {
                    for (int q = -1; q < m2; ++q) {
                        if (p == -1 && q == -1) continue;
                        int vp = node(r1, p), vn = node(r1, p + 1);
                        int wq = node(r2, q), wn = node(r2, q + 1);
                        if (use_candidates_ && vp && wn && !near(vp, wn) && wq && vn &&
                            !near(wq, vn))
                            continue;
                        double load1 = prefix[r1][p + 1] + (prefix[r2][m2] - prefix[r2][q + 1]);
                        double load2 = prefix[r2][q + 1] + (prefix[r1][m1] - prefix[r1][p + 1]);
                        if (load1 > inst_.capacity || load2 > inst_.capacity) continue;
                        double delta = pc(vp, wn) + pc(wq, vn) - pc(vp, vn) - pc(wq, wn);
                        if (delta < -kImproveTol)
                            consider(best, {Move::TwoOptStar, delta, static_cast<int>(r1), p,
                                            static_cast<int>(r2), q, 0});
                    }
                }
            }
        }
    }

    void drop_empty_routes() {
        for (size_t r = routes_.size(); r-- > 0;) {
            if (routes_[r].empty()) {
                routes_.erase(routes_.begin() + r);
                route_demand_.erase(route_demand_.begin() + r);
            }
        }
    }

    void apply(const Move& m) {
        switch (m.type) {
            case Move::TwoOpt: {
                Route& r = routes_[m.r1];
                std::reverse(r.begin() + m.p1, r.begin() + m.p2 + 1);
                break;
            }
            case Move::OrOpt: {
                Route& r = routes_[m.r1];
                Route chain(r.begin() + m.p1, r.begin() + m.p1 + m.len);
                r.erase(r.begin() + m.p1, r.begin() + m.p1 + m.len);
                int q = m.p2;
                if (q > m.p1 - 1) q -= m.len;  // positions shifted by the removal
                r.insert(r.begin() + q + 1, chain.begin(), chain.end());
                break;
            }
            case Move::Relocate: {
                int v = routes_[m.r1][m.p1];
                routes_[m.r1].erase(routes_[m.r1].begin() + m.p1);
                routes_[m.r2].insert(routes_[m.r2].begin() + m.p2 + 1, v);
                route_demand_[m.r1] -= inst_.demand(v);
                route_demand_[m.r2] += inst_.demand(v);
                drop_empty_routes();
                break;
            }
            case Move::Swap: {
                int v = routes_[m.r1][m.p1];
                int w = routes_[m.r2][m.p2];
                routes_[m.r1][m.p1] = w;
                routes_[m.r2][m.p2] = v;
                route_demand_[m.r1] += inst_.demand(w) - inst_.demand(v);
                route_demand_[m.r2] += inst_.demand(v) - inst_.demand(w);
                break;
            }
            case Move::TwoOptStar: {
                Route& a = routes_[m.r1];
                Route& b = routes_[m.r2];
                Route tail_a(a.begin() + m.p1 + 1, a.end());
                Route tail_b(b.begin() + m.p2 + 1, b.end());
                a.erase(a.begin() + m.p1 + 1, a.end());
                b.erase(b.begin() + m.p2 + 1, b.end());
                a.insert(a.end(), tail_b.begin(), tail_b.end());
                b.insert(b.end(), tail_a.begin(), tail_a.end());
                route_demand_[m.r1] = 0.0;
                for (int v : a) route_demand_[m.r1] += inst_.demand(v);
                route_demand_[m.r2] = 0.0;
                for (int v : b) route_demand_[m.r2] += inst_.demand(v);
                drop_empty_routes();
                break;
            }
            case Move::None:
                break;
        }
    }
};

}  // namespace

std::vector<Saving> compute_savings(const Instance& inst, const DistanceMatrix& dist) {
    std::vector<Saving> savings;
    int n = inst.num_customers();
    for (int i = 1; i <= n; ++i) {
        for (int j = i + 1; j <= n; ++j) {
            double s = dist(0, i) + dist(0, j) - dist(i, j);
            if (s > 0.0) savings.push_back({i, j, s});
        }
    }
    std::sort(savings.begin(), savings.end(), [](const Saving& a, const Saving& b) {
        if (a.value != b.value) return a.value > b.value;
        if (a.i != b.i) return a.i < b.i;
        return a.j < b.j;
    });
    return savings;
}

Solution clarke_wright(const Instance& inst) {
    inst.check_invariants();
    DistanceMatrix dist(inst);
    int n = inst.num_customers();

    std::vector<Route> routes(n);
    std::vector<int> route_of(n + 1);
    std::vector<double> demand(n);
    for (int i = 1; i <= n; ++i) {
        routes[i - 1] = {i};
        route_of[i] = i - 1;
        demand[i - 1] = inst.demand(i);
    }

    // Route ends never reappear after a merge, so one pass over the sorted
    // savings list reaches the fixpoint of the best-merge rule.
    for (const Saving& s : compute_savings(inst, dist)) {
        int ri = route_of[s.i], rj = route_of[s.j];
        if (ri == rj) continue;
        if (demand[ri] + demand[rj] > inst.capacity) continue;
        Route& a = routes[ri];
        Route& b = routes[rj];
        bool i_front = a.front() == s.i, i_back = a.back() == s.i;
        bool j_front = b.front() == s.j, j_back = b.back() == s.j;
        if (!(i_front || i_back) || !(j_front || j_back)) continue;
        if (!i_back) std::reverse(a.begin(), a.end());   // i to the back of a
        if (!j_front) std::reverse(b.begin(), b.end());  // j to the front of b
        for (int v : b) route_of[v] = ri;
        a.insert(a.end(), b.begin(), b.end());
        demand[ri] += demand[rj];
        b.clear();
        demand[rj] = 0.0;
    }

    Solution sol;
    for (Route& r : routes)
        if (!r.empty()) sol.routes.push_back(std::move(r));
    sol.cost = solution_cost(dist, sol.routes);
    return sol;
}

Solution local_search(const Instance& inst, const Solution& start,
                      const LocalSearchOptions& opts) {
    DistanceMatrix dist(inst);
    Searcher s(inst, dist, opts.neighbor_limit, opts.seed);
    s.load(start);
    auto t0 = Clock::now();
    s.descend(opts.budget_s, t0, opts.max_moves);
    Solution result = s.snapshot();
    return result.cost <= start.cost ? result : start;
}

Solution guided_local_search(const Instance& inst, const GlsOptions& opts) {
    auto t0 = Clock::now();
    DistanceMatrix dist(inst);
    Solution best = clarke_wright(inst);

    Searcher s(inst, dist, opts.neighbor_limit, opts.seed);
    s.load(best);

    long edges = 0;
    for (const Route& r : best.routes) edges += static_cast<long>(r.size()) + 1;
    s.set_penalty_weight(edges > 0 ? 0.1 * best.cost / static_cast<double>(edges) : 0.0);

    auto log_best = [&] {
        if (opts.improvement_log)
            opts.improvement_log->push_back({seconds_since(t0), best.cost});
    };
    log_best();

    long outer = 0;
    while (true) {
        if (opts.max_outer_iters > 0) {
            if (outer >= opts.max_outer_iters) break;
        } else if (seconds_since(t0) > opts.budget_s) {
            break;
        }
        long deterministic_cap = opts.max_outer_iters > 0 ? 1000000 : 0;
        s.descend(opts.budget_s, t0, deterministic_cap);
        double cost = s.true_cost();
        if (cost < best.cost - kImproveTol) {
            best = s.snapshot();
            log_best();
        }
        s.penalize_max_utility();
        ++outer;
    }
    return best;
}

}  // namespace cvrp::heur
