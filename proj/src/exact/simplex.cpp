#include "cvrp/simplex.hpp"

#include <cassert>
#include <cmath>
#include <cstdlib>

namespace cvrp::lp {

int Problem::add_var(double cost, double lo, double hi) {
    obj.push_back(cost);
    lb.push_back(lo);
    ub.push_back(hi);
    return num_vars() - 1;
}

void Problem::add_row(std::vector<Term> terms, Sense sense, double rhs) {
    rows.push_back({std::move(terms), sense, rhs});
}

namespace {

enum VState : signed char { kBasic = 0, kAtLower = 1, kAtUpper = 2 };

constexpr double kPivotTol = 1e-9;

class Simplex {
public:
    Simplex(const Problem& p, double tol, long max_iters,
            const std::function<bool()>& interrupt)
        : p_(p), tol_(tol), m_(static_cast<int>(p.rows.size())), n_(p.num_vars()),
          interrupt_(interrupt) {
        cols_ = n_ + 2 * m_;  // structural | slack | artificial
        max_iters_ = max_iters > 0 ? max_iters : 200L * (m_ + cols_) + 5000;
        build();
    }

    Result run() {
        // Phase 1: drive artificial infeasibility to zero.
        std::vector<double> c1(cols_, 0.0);
        for (int r = 0; r < m_; ++r) c1[n_ + m_ + r] = 1.0;
        Status st = iterate(c1);
        if (st == Status::IterLimit) return {st, 0.0, {}};
        if (objective(c1) > tol_ * std::max(1.0, rhs_scale_)) return {Status::Infeasible, 0.0, {}};

        // Phase 2: original objective with artificials pinned at zero.
        for (int r = 0; r < m_; ++r) {
            lb_[n_ + m_ + r] = 0.0;
            ub_[n_ + m_ + r] = 0.0;
        }
        std::vector<double> c2(cols_, 0.0);
        for (int j = 0; j < n_; ++j) c2[j] = p_.obj[j];
        st = iterate(c2);
        if (st != Status::Optimal) return {st, 0.0, {}};

        Result res;
        res.status = Status::Optimal;
        res.x.assign(n_, 0.0);
        std::vector<double> full = current_point();
        for (int j = 0; j < n_; ++j) res.x[j] = full[j];
        res.objective = 0.0;
        for (int j = 0; j < n_; ++j) res.objective += p_.obj[j] * res.x[j];
        return res;
    }

private:
    const Problem& p_;
    double tol_;
    int m_, n_, cols_;
    long max_iters_;
    std::function<bool()> interrupt_;
    double rhs_scale_ = 1.0;

    std::vector<double> t_;      // m x cols current tableau B^-1 A
    std::vector<double> xb_;     // basic values
    std::vector<int> basis_;     // column basic in each row
    std::vector<signed char> state_;
    std::vector<double> lb_, ub_;

    double& T(int r, int j) { return t_[static_cast<size_t>(r) * cols_ + j]; }

    void build() {
        t_.assign(static_cast<size_t>(m_) * cols_, 0.0);
        lb_.assign(cols_, 0.0);
        ub_.assign(cols_, 0.0);
        state_.assign(cols_, kAtLower);
        basis_.assign(m_, -1);
        xb_.assign(m_, 0.0);

        for (int j = 0; j < n_; ++j) {
            lb_[j] = p_.lb[j];
            ub_[j] = p_.ub[j];
            // Nonbasic start at a finite bound.
            if (lb_[j] > -kInf) {
                state_[j] = kAtLower;
            } else {
                assert(ub_[j] < kInf);
                state_[j] = kAtUpper;
            }
        }
        std::vector<double> rhs(m_);
        for (int r = 0; r < m_; ++r) {
            const Row& row = p_.rows[r];
            for (const Term& term : row.terms) T(r, term.var) += term.coef;
            int slack = n_ + r;
            T(r, slack) = 1.0;
            switch (row.sense) {
                case Sense::Le: lb_[slack] = 0.0; ub_[slack] = kInf; state_[slack] = kAtLower; break;
                case Sense::Eq: lb_[slack] = 0.0; ub_[slack] = 0.0; state_[slack] = kAtLower; break;
                case Sense::Ge: lb_[slack] = -kInf; ub_[slack] = 0.0; state_[slack] = kAtUpper; break;
            }
            rhs[r] = row.rhs;
            rhs_scale_ = std::max(rhs_scale_, std::abs(row.rhs));
        }
        // Artificial basis: one per row, oriented so the basic value is >= 0.
        for (int r = 0; r < m_; ++r) {
            double residual = rhs[r];
            for (int j = 0; j < n_; ++j) {
                double v = nonbasic_value(j);
                if (v != 0.0) residual -= T(r, j) * v;
            }
            if (residual < 0.0) {
                for (int j = 0; j < n_ + m_; ++j) T(r, j) = -T(r, j);
                residual = -residual;
            }
            int art = n_ + m_ + r;
            T(r, art) = 1.0;
            lb_[art] = 0.0;
            ub_[art] = kInf;
            state_[art] = kBasic;
            basis_[r] = art;
            xb_[r] = residual;
        }
    }

    double nonbasic_value(int j) const {
        return state_[j] == kAtUpper ? ub_[j] : lb_[j];
    }

    std::vector<double> current_point() {
        std::vector<double> x(cols_);
        for (int j = 0; j < cols_; ++j)
            if (state_[j] != kBasic) x[j] = nonbasic_value(j);
        for (int r = 0; r < m_; ++r) x[basis_[r]] = xb_[r];
        return x;
    }

    double objective(const std::vector<double>& c) {
        std::vector<double> x = current_point();
        double v = 0.0;
        for (int j = 0; j < cols_; ++j) v += c[j] * x[j];
        return v;
    }

    Status iterate(const std::vector<double>& c) {
        long iters = 0;
        long stall = 0;
        double last_obj = objective(c);
        bool bland = false;
        std::vector<double> d(cols_);
        while (true) {
            if (++iters > max_iters_) return Status::IterLimit;
            if (interrupt_ && (iters & 63) == 0 && interrupt_()) return Status::IterLimit;
            // Reduced costs d = c - cB' T.
            for (int j = 0; j < cols_; ++j) d[j] = c[j];
            for (int r = 0; r < m_; ++r) {
                double cb = c[basis_[r]];
                if (cb == 0.0) continue;
                const double* row = &t_[static_cast<size_t>(r) * cols_];
                for (int j = 0; j < cols_; ++j) d[j] -= cb * row[j];
            }

            int q = -1;
            double best = tol_;
            for (int j = 0; j < cols_; ++j) {
                if (state_[j] == kBasic || lb_[j] == ub_[j]) continue;
                double score = 0.0;
                if (state_[j] == kAtLower && d[j] < -tol_) score = -d[j];
                else if (state_[j] == kAtUpper && d[j] > tol_) score = d[j];
                else continue;
                if (bland) { q = j; break; }
                if (score > best) { best = score; q = j; }
            }
            if (q < 0) return Status::Optimal;

            double dir = state_[q] == kAtLower ? 1.0 : -1.0;
            // Ratio test over basic bounds plus the entering variable's own range.
            double tmax = ub_[q] - lb_[q];  // may be inf
            int leave = -1;
            double leave_pivot = 0.0;
            bool leave_to_upper = false;
            for (int r = 0; r < m_; ++r) {
                double w = dir * T(r, q);
                int b = basis_[r];
                double t_r;
                bool to_upper;
                if (w > kPivotTol) {
                    if (lb_[b] <= -kInf) continue;
                    t_r = (xb_[r] - lb_[b]) / w;
                    to_upper = false;
                } else if (w < -kPivotTol) {
                    if (ub_[b] >= kInf) continue;
                    t_r = (xb_[r] - ub_[b]) / w;
                    to_upper = true;
                } else {
                    continue;
                }
                if (t_r < 0.0) t_r = 0.0;
                bool better = t_r < tmax - kPivotTol;
                bool tie = !better && t_r < tmax + kPivotTol && leave >= 0;
                if (tie) {
                    better = bland ? basis_[r] < basis_[leave]
                                   : std::abs(T(r, q)) > std::abs(leave_pivot);
                }
                if (better) {
                    tmax = t_r;
                    leave = r;
                    leave_pivot = T(r, q);
                    leave_to_upper = to_upper;
                }
            }
            if (tmax >= kInf) return Status::Unbounded;

            if (leave < 0) {
                // Bound-to-bound flip of the entering variable.
                for (int r = 0; r < m_; ++r) xb_[r] -= dir * tmax * T(r, q);
                state_[q] = state_[q] == kAtLower ? kAtUpper : kAtLower;
            } else {
                double enter_val = nonbasic_value(q) + dir * tmax;
                for (int r = 0; r < m_; ++r) xb_[r] -= dir * tmax * T(r, q);
                int old = basis_[leave];
                state_[old] = leave_to_upper ? kAtUpper : kAtLower;
                basis_[leave] = q;
                state_[q] = kBasic;
                xb_[leave] = enter_val;
                // Pivot the tableau on (leave, q).
                double piv = T(leave, q);
                double* prow = &t_[static_cast<size_t>(leave) * cols_];
                double inv = 1.0 / piv;
                for (int j = 0; j < cols_; ++j) prow[j] *= inv;
                for (int r = 0; r < m_; ++r) {
                    if (r == leave) continue;
                    double f = T(r, q);
                    if (f == 0.0) continue;
                    double* row = &t_[static_cast<size_t>(r) * cols_];
                    for (int j = 0; j < cols_; ++j) row[j] -= f * prow[j];
                }
            }

            double obj = objective(c);
            if (obj < last_obj - tol_ * std::max(1.0, std::abs(last_obj))) {
                last_obj = obj;
                stall = 0;
            } else if (++stall > 2L * (m_ + cols_)) {
                bland = true;  // anti-cycling fallback
            }
        }
    }
};

}  // namespace

Result solve(const Problem& p, double tol, long max_iters,
             const std::function<bool()>& interrupt) {
    Simplex s(p, tol, max_iters, interrupt);
    return s.run();
}

}  // namespace cvrp::lp
