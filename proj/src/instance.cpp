#include "cvrp/instance.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace cvrp {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

// Shortest decimal form that parses back to the same double.
std::string format_number(double v) {
    char buf[64];
    for (int prec : {15, 16, 17}) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

}  // namespace

void Instance::check_invariants() const {
    if (customers.empty()) throw SemanticError("instance has no customers");
    if (capacity <= 0.0) throw SemanticError("capacity must be positive");
    for (int i = 1; i <= num_customers(); ++i) {
        double q = demand(i);
        if (q <= 0.0)
            throw SemanticError("customer " + std::to_string(i) + " has non-positive demand");
        if (q > capacity)
            throw SemanticError("customer " + std::to_string(i) +
                                " demand exceeds vehicle capacity");
    }
}

DistanceMatrix::DistanceMatrix(const Instance& inst) : n_(inst.num_nodes()) {
    d_.assign(static_cast<size_t>(n_) * n_, 0.0);
    for (int i = 0; i < n_; ++i) {
        Point a = inst.node_pos(i);
        for (int j = i + 1; j < n_; ++j) {
            Point b = inst.node_pos(j);
            double c = std::hypot(a.x - b.x, a.y - b.y);
            if (inst.rounding == DistanceRounding::NearestInteger) c = std::round(c);
            d_[i * n_ + j] = c;
            d_[j * n_ + i] = c;
        }
    }
}

Instance parse_cvrplib(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::map<std::string, std::string> headers;
    std::vector<Point> coords;
    std::vector<double> demands;
    std::vector<int> depot_nodes;
    bool saw_coords = false, saw_demands = false, saw_depot = false;
    int dimension = -1;

    auto read_dimension = [&]() {
        auto it = headers.find("DIMENSION");
        if (it == headers.end()) throw FormatError("missing required section: DIMENSION");
        return std::stoi(it->second);
    };

    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty()) continue;
        if (line == "EOF") break;
        if (line == "NODE_COORD_SECTION") {
            dimension = read_dimension();
            coords.resize(dimension);
            std::vector<bool> seen(dimension, false);
            for (int k = 0; k < dimension; ++k) {
                int id;
                double x, y;
                if (!(in >> id >> x >> y) || id < 1 || id > dimension)
                    throw FormatError("malformed NODE_COORD_SECTION row");
                if (seen[id - 1]) throw FormatError("duplicate node in NODE_COORD_SECTION");
                seen[id - 1] = true;
                coords[id - 1] = {x, y};
            }
            saw_coords = true;
        } else if (line == "DEMAND_SECTION") {
            dimension = read_dimension();
            demands.assign(dimension, -1.0);
            for (int k = 0; k < dimension; ++k) {
                int id;
                double q;
                if (!(in >> id >> q) || id < 1 || id > dimension)
                    throw FormatError("malformed DEMAND_SECTION row");
                if (q < 0.0) throw FormatError("negative demand in DEMAND_SECTION");
                demands[id - 1] = q;
            }
            saw_demands = true;
        } else if (line == "DEPOT_SECTION") {
            int id;
            while (in >> id && id != -1) depot_nodes.push_back(id);
            saw_depot = true;
        } else {
            size_t colon = line.find(':');
            if (colon == std::string::npos)
                throw FormatError("unrecognized line: " + line);
            headers[trim(line.substr(0, colon))] = trim(line.substr(colon + 1));
        }
    }

    for (const char* key : {"DIMENSION", "CAPACITY", "EDGE_WEIGHT_TYPE"})
        if (!headers.count(key))
            throw FormatError(std::string("missing required section: ") + key);
    if (!saw_coords) throw FormatError("missing required section: NODE_COORD_SECTION");
    if (!saw_demands) throw FormatError("missing required section: DEMAND_SECTION");

    if (headers["EDGE_WEIGHT_TYPE"] != "EUC_2D")
        throw UnsupportedFeatureError("unsupported EDGE_WEIGHT_TYPE: " +
                                      headers["EDGE_WEIGHT_TYPE"]);

    dimension = read_dimension();
    if (dimension < 2) throw FormatError("DIMENSION must be at least 2");

    // Depot detection: DEPOT_SECTION wins; otherwise the unique zero-demand node.
    int depot_node;
    if (saw_depot) {
        if (depot_nodes.size() != 1)
            throw FormatError("DEPOT_SECTION must list exactly one depot");
        depot_node = depot_nodes[0];
        if (depot_node < 1 || depot_node > dimension)
            throw FormatError("DEPOT_SECTION index out of range");
    } else {
        std::vector<int> zeros;
        for (int i = 0; i < dimension; ++i)
            if (demands[i] == 0.0) zeros.push_back(i + 1);
        if (zeros.size() != 1)
            throw FormatError("no DEPOT_SECTION and depot is ambiguous (" +
                              std::to_string(zeros.size()) + " zero-demand nodes)");
        depot_node = zeros[0];
    }

    Instance inst;
    auto it = headers.find("NAME");
    inst.name = it == headers.end() ? "" : it->second;
    inst.capacity = std::stod(headers["CAPACITY"]);
    inst.depot = coords[depot_node - 1];
    for (int i = 1; i <= dimension; ++i) {
        if (i == depot_node) continue;
        inst.customers.push_back({coords[i - 1], demands[i - 1]});
    }

    if (inst.capacity <= 0.0) throw SemanticError("CAPACITY must be positive");
    for (int i = 1; i <= inst.num_customers(); ++i) {
        if (inst.demand(i) <= 0.0)
            throw SemanticError("customer " + std::to_string(i) + " has non-positive demand");
        if (inst.demand(i) > inst.capacity)
            throw SemanticError("customer " + std::to_string(i) +
                                " demand exceeds vehicle capacity");
    }
    return inst;
}

std::string serialize_cvrplib(const Instance& inst) {
    std::ostringstream out;
    out << "NAME : " << inst.name << "\n";
    out << "TYPE : CVRP\n";
    out << "DIMENSION : " << inst.num_nodes() << "\n";
    out << "EDGE_WEIGHT_TYPE : EUC_2D\n";
    out << "CAPACITY : " << format_number(inst.capacity) << "\n";
    out << "NODE_COORD_SECTION\n";
    out << "1 " << format_number(inst.depot.x) << " " << format_number(inst.depot.y) << "\n";
    for (int i = 1; i <= inst.num_customers(); ++i) {
        Point p = inst.node_pos(i);
        out << (i + 1) << " " << format_number(p.x) << " " << format_number(p.y) << "\n";
    }
    out << "DEMAND_SECTION\n";
    out << "1 0\n";
    for (int i = 1; i <= inst.num_customers(); ++i)
        out << (i + 1) << " " << format_number(inst.demand(i)) << "\n";
    out << "DEPOT_SECTION\n1\n-1\nEOF\n";
    return out.str();
}

double solution_cost(const DistanceMatrix& dist, const std::vector<Route>& routes) {
    double total = 0.0;
    for (const Route& r : routes) {
        if (r.empty()) continue;
        int prev = 0;
        for (int node : r) {
            total += dist(prev, node);
            prev = node;
        }
        total += dist(prev, 0);
    }
    return total;
}

double solution_cost(const Instance& inst, const std::vector<Route>& routes) {
    return solution_cost(DistanceMatrix(inst), routes);
}

std::string Violation::describe() const {
    std::ostringstream out;
    switch (kind) {
        case Kind::MissingCustomer:
            out << "customer " << customer << " is not served";
            break;
        case Kind::DuplicateCustomer:
            out << "customer " << customer << " is served more than once";
            break;
        case Kind::CapacityExceeded:
            out << "route " << route << " exceeds capacity by " << amount;
            break;
        case Kind::CostMismatch:
            out << "stated cost differs from recomputed cost by " << amount;
            break;
    }
    return out.str();
}

FeasibilityReport validate(const Instance& inst, const Solution& sol) {
    FeasibilityReport report;
    int n = inst.num_customers();
    std::vector<int> count(n + 1, 0);
    for (size_t ri = 0; ri < sol.routes.size(); ++ri) {
        double load = 0.0;
        for (int node : sol.routes[ri]) {
            if (node >= 1 && node <= n) {
                ++count[node];
                load += inst.demand(node);
            }
        }
        if (load > inst.capacity)
            report.violations.push_back({Violation::Kind::CapacityExceeded, -1,
                                         static_cast<int>(ri), load - inst.capacity});
    }
    for (int i = 1; i <= n; ++i) {
        if (count[i] == 0)
            report.violations.push_back({Violation::Kind::MissingCustomer, i, -1, 0.0});
        else if (count[i] > 1)
            report.violations.push_back({Violation::Kind::DuplicateCustomer, i, -1, 0.0});
    }
    double recomputed = solution_cost(inst, sol.routes);
    double diff = std::abs(recomputed - sol.cost);
    if (diff > 1e-9 * std::max(1.0, std::abs(recomputed)))
        report.violations.push_back({Violation::Kind::CostMismatch, -1, -1, diff});
    return report;
}

double gap(double proposed, double optimal) {
    if (optimal <= 0.0) throw std::domain_error("gap: optimal cost must be positive");
    return (proposed - optimal) / optimal;
}

std::string serialize_solution(const Solution& sol) {
    std::ostringstream out;
    for (size_t k = 0; k < sol.routes.size(); ++k) {
        out << "Route #" << (k + 1) << ":";
        for (int node : sol.routes[k]) out << " " << node;
        out << "\n";
    }
    out << "Cost " << format_number(sol.cost) << "\n";
    return out.str();
}

Solution parse_solution(const std::string& text) {
    Solution sol;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty()) continue;
        if (line.rfind("Route", 0) == 0) {
            size_t colon = line.find(':');
            if (colon == std::string::npos) throw FormatError("malformed route line");
            std::istringstream row(line.substr(colon + 1));
            Route r;
            int node;
            while (row >> node) r.push_back(node);
            sol.routes.push_back(std::move(r));
        } else if (line.rfind("Cost", 0) == 0) {
            sol.cost = std::stod(line.substr(4));
        } else {
            throw FormatError("unrecognized solution line: " + line);
        }
    }
    return sol;
}

}  // namespace cvrp
