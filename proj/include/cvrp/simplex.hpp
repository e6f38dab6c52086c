#ifndef CVRP_SIMPLEX_HPP
#define CVRP_SIMPLEX_HPP

#include <functional>
#include <limits>
#include <vector>

namespace cvrp::lp {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Term {
    int var;
    double coef;
};

enum class Sense { Le, Eq, Ge };

struct Row {
    std::vector<Term> terms;
    Sense sense;
    double rhs;
};

// min c'x  s.t. rows, l <= x <= u
struct Problem {
    std::vector<double> obj;
    std::vector<double> lb;
    std::vector<double> ub;
    std::vector<Row> rows;

    int num_vars() const { return static_cast<int>(obj.size()); }
    int add_var(double cost, double lo, double hi);
    void add_row(std::vector<Term> terms, Sense sense, double rhs);
};

enum class Status { Optimal, Infeasible, Unbounded, IterLimit };

struct Result {
    Status status;
    double objective = 0.0;
    std::vector<double> x;
};

// Dense bounded-variable primal simplex, two-phase with artificials.
// Dantzig pricing with a Bland's-rule fallback against cycling. A true
// `interrupt` (polled periodically) stops the solve with IterLimit so callers
// can enforce wall-clock budgets on large models.
Result solve(const Problem& p, double tol = 1e-7, long max_iters = 0,
             const std::function<bool()>& interrupt = {});

}  // namespace cvrp::lp

#endif
