#ifndef CVRP_INSTANCE_HPP
#define CVRP_INSTANCE_HPP

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace cvrp {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

enum class DistanceRounding { Exact, NearestInteger };

// Parse/validation failures carry a message naming the offending section or
// customer so callers can report them verbatim.
class FormatError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};
class UnsupportedFeatureError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};
class SemanticError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Customer {
    Point pos;
    double demand = 0.0;
};

// A CVRP instance: depot, customers (1-based indices in routes, 0 is the
// depot), vehicle capacity. Immutable after construction.
struct Instance {
    std::string name;
    Point depot;
    std::vector<Customer> customers;
    double capacity = 0.0;
    DistanceRounding rounding = DistanceRounding::Exact;

    int num_customers() const { return static_cast<int>(customers.size()); }
    int num_nodes() const { return num_customers() + 1; }

    // Node access with the 0 = depot convention.
    Point node_pos(int i) const { return i == 0 ? depot : customers[i - 1].pos; }
    double demand(int i) const { return i == 0 ? 0.0 : customers[i - 1].demand; }

    // Throws SemanticError if an invariant is broken (n < 1, Q <= 0,
    // a demand outside (0, Q]).
    void check_invariants() const;
};

using Route = std::vector<int>;

struct Solution {
    std::vector<Route> routes;
    double cost = 0.0;
};

// Symmetric (n+1) x (n+1) Euclidean cost matrix.
class DistanceMatrix {
public:
    DistanceMatrix() = default;
    explicit DistanceMatrix(const Instance& inst);

    double operator()(int i, int j) const { return d_[i * n_ + j]; }
    int num_nodes() const { return n_; }

private:
    int n_ = 0;
    std::vector<double> d_;
};

struct Violation {
    enum class Kind { MissingCustomer, DuplicateCustomer, CapacityExceeded, CostMismatch };
    Kind kind;
    int customer = -1;   // MissingCustomer / DuplicateCustomer
    int route = -1;      // CapacityExceeded
    double amount = 0.0; // overload, or |recomputed - stated| for CostMismatch
    std::string describe() const;
};

struct FeasibilityReport {
    std::vector<Violation> violations;
    bool feasible() const { return violations.empty(); }
};

Instance parse_cvrplib(const std::string& text);
std::string serialize_cvrplib(const Instance& inst);

double solution_cost(const Instance& inst, const std::vector<Route>& routes);
double solution_cost(const DistanceMatrix& dist, const std::vector<Route>& routes);

// Never throws; every problem is reported as a Violation.
FeasibilityReport validate(const Instance& inst, const Solution& sol);

// (proposed - optimal) / optimal. Throws std::domain_error for optimal <= 0.
double gap(double proposed, double optimal);

// CVRPLib-style .sol text: "Route #k: i1 i2 ... im" lines, then "Cost <value>".
std::string serialize_solution(const Solution& sol);
Solution parse_solution(const std::string& text);

}  // namespace cvrp

#endif
