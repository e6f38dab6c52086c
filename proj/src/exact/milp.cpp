#include <cmath>
#include <sstream>

#include "cvrp/exact.hpp"

namespace cvrp::exact {

std::pair<int, int> MilpModel::edge_of(int var) const {
    for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= n; ++j)
            if (i != j && edge_var(i, j) == var) return {i, j};
    return {-1, -1};
}

MilpModel build_mtz_model(const Instance& inst) {
    inst.check_invariants();
    const int n = inst.num_customers();
    const double Q = inst.capacity;
    DistanceMatrix dist(inst);

    MilpModel m;
    m.n = n;
    m.edge_index.assign((n + 1) * (n + 1), -1);

    for (int i = 0; i <= n; ++i) {
        for (int j = 0; j <= n; ++j) {
            if (i == j) continue;
            m.edge_index[i * (n + 1) + j] = m.num_vars();
            m.obj.push_back(dist(i, j));
            m.lb.push_back(0.0);
            m.ub.push_back(1.0);
            m.is_binary.push_back(true);
        }
    }
    // Load variables u_i with q_i <= u_i <= Q. Integer in the formulation,
    // relaxed to continuous during the search (MTZ stays valid).
    for (int i = 1; i <= n; ++i) {
        m.obj.push_back(0.0);
        m.lb.push_back(inst.demand(i));
        m.ub.push_back(Q);
        m.is_binary.push_back(false);
    }

    // Out-degree and in-degree of exactly 1 per customer.
    for (int i = 1; i <= n; ++i) {
        std::vector<lp::Term> row;
        for (int j = 0; j <= n; ++j)
            if (j != i) row.push_back({m.edge_var(i, j), 1.0});
        m.rows.push_back({std::move(row), lp::Sense::Eq, 1.0});
    }
    for (int j = 1; j <= n; ++j) {
        std::vector<lp::Term> row;
        for (int i = 0; i <= n; ++i)
            if (i != j) row.push_back({m.edge_var(i, j), 1.0});
        m.rows.push_back({std::move(row), lp::Sense::Eq, 1.0});
    }
    // MTZ: u_i - u_j + Q e_ij <= Q - q_j for every ordered customer pair.
    for (int i = 1; i <= n; ++i) {
        for (int j = 1; j <= n; ++j) {
            if (i == j) continue;
            std::vector<lp::Term> row{{m.load_var(i), 1.0},
                                      {m.load_var(j), -1.0},
                                      {m.edge_var(i, j), Q}};
            m.rows.push_back({std::move(row), lp::Sense::Le, Q - inst.demand(j)});
        }
    }
    // Two valid inequalities that tighten the relaxation considerably
    // (fractional MTZ solutions love opposing half-edges and too few routes):
    // e_ij + e_ji <= 1 per customer pair, and at least ceil(D/Q) routes must
    // leave the depot.
    for (int i = 1; i <= n; ++i)
        for (int j = i + 1; j <= n; ++j)
            m.rows.push_back({{{m.edge_var(i, j), 1.0}, {m.edge_var(j, i), 1.0}},
                              lp::Sense::Le, 1.0});
    double total_demand = 0.0;
    for (int i = 1; i <= n; ++i) total_demand += inst.demand(i);
    double min_routes = std::ceil(total_demand / Q - 1e-9);
    std::vector<lp::Term> depot_out;
    for (int j = 1; j <= n; ++j) depot_out.push_back({m.edge_var(0, j), 1.0});
    m.rows.push_back({std::move(depot_out), lp::Sense::Ge, min_routes});
    return m;
}

namespace {

std::string var_name(const MilpModel& m, int v) {
    if (v < m.num_edge_vars()) {
        auto [i, j] = m.edge_of(v);
        return "e_" + std::to_string(i) + "_" + std::to_string(j);
    }
    return "u_" + std::to_string(v - m.num_edge_vars() + 1);
}

void write_terms(std::ostream& out, const MilpModel& m, const std::vector<lp::Term>& terms) {
    bool first = true;
    for (const lp::Term& t : terms) {
        if (t.coef == 0.0) continue;
        double c = t.coef;
        if (first) {
            if (c < 0) out << "- ";
            first = false;
        } else {
            out << (c < 0 ? " - " : " + ");
        }
        c = std::abs(c);
        if (c != 1.0) out << c << " ";
        out << var_name(m, t.var);
    }
    if (first) out << "0";
}

}  // namespace

std::string export_lp(const MilpModel& m) {
    std::ostringstream out;
    out.precision(17);  // coefficients must survive a text round-trip
    out << "Minimize\n obj:";
    {
        std::vector<lp::Term> objterms;
        for (int v = 0; v < m.num_vars(); ++v)
            if (m.obj[v] != 0.0) objterms.push_back({v, m.obj[v]});
        out << " ";
        write_terms(out, m, objterms);
    }
    out << "\nSubject To\n";
    for (size_t r = 0; r < m.rows.size(); ++r) {
        out << " c" << (r + 1) << ": ";
        write_terms(out, m, m.rows[r].terms);
        switch (m.rows[r].sense) {
            case lp::Sense::Le: out << " <= "; break;
            case lp::Sense::Eq: out << " = "; break;
            case lp::Sense::Ge: out << " >= "; break;
        }
        out << m.rows[r].rhs << "\n";
    }
    out << "Bounds\n";
    for (int v = m.num_edge_vars(); v < m.num_vars(); ++v)
        out << " " << m.lb[v] << " <= " << var_name(m, v) << " <= " << m.ub[v] << "\n";
    out << "Binary\n";
    for (int v = 0; v < m.num_edge_vars(); ++v) out << " " << var_name(m, v) << "\n";
    out << "General\n";
    for (int v = m.num_edge_vars(); v < m.num_vars(); ++v)
        out << " " << var_name(m, v) << "\n";
    out << "End\n";
    return out.str();
}

std::vector<Route> routes_from_edges(const MilpModel& m, const std::vector<double>& x) {
    const int n = m.n;
    std::vector<int> succ(n + 1, -1);
    std::vector<int> depot_out;
    for (int i = 0; i <= n; ++i) {
        for (int j = 0; j <= n; ++j) {
            if (i == j) continue;
            if (x[m.edge_var(i, j)] > 0.5) {
                if (i == 0) depot_out.push_back(j);
                else succ[i] = j;
            }
        }
    }
    std::vector<Route> routes;
    for (int start : depot_out) {
        Route r;
        int cur = start;
        while (cur != 0 && cur != -1 && static_cast<int>(r.size()) <= n) {
            r.push_back(cur);
            cur = succ[cur];
        }
        routes.push_back(std::move(r));
    }
    return routes;
}

}  // namespace cvrp::exact
