#include "gridse/measurement_model.hpp"

#include <algorithm>

#include "gridse/error.hpp"
#include "gridse/parallel.hpp"

namespace gridse {

MeasurementModel::MeasurementModel(const NetworkGraph& graph, const MeasurementSet& set)
    : graph_(&graph), set_(&set) {
    std::vector<BranchAdmittance> y;
    y.reserve(graph.branches().size());
    for (const Branch& br : graph.branches()) {
        y.push_back(br.in_service ? branch_admittance(br) : BranchAdmittance{});
    }
    active_.reserve(set.active().size());
    for (const Measurement& m : set.active()) active_.push_back(make_row(m, y));
    reactive_.reserve(set.reactive().size());
    for (const Measurement& m : set.reactive()) reactive_.push_back(make_row(m, y));
}

MeasurementModel::Row MeasurementModel::make_row(const Measurement& m,
                                                 const std::vector<BranchAdmittance>& y) const {
    const NetworkGraph& g = *graph_;
    Row row;
    row.kind = m.kind;
    row.bus = g.index_of(m.at_bus);
    const Bus& bus = g.buses()[row.bus];
    auto add_term = [&](std::size_t k) {
        const Branch& br = g.branches()[k];
        const int far = br.from_bus == m.at_bus ? br.to_bus : br.from_bus;
        row.terms.push_back({row.bus, g.index_of(far), end_admittance(br, y[k], m.at_bus)});
    };
    switch (m.kind) {
        case MeasurementKind::p_injection:
        case MeasurementKind::q_injection:
            row.shunt = m.kind == MeasurementKind::p_injection ? bus.shunt_g : bus.shunt_b;
            for (const std::size_t k : g.incident(row.bus)) add_term(k);
            break;
        case MeasurementKind::p_flow:
        case MeasurementKind::q_flow: {
            const auto between = g.branches_between(m.at_bus, m.to_bus);
            if (between.empty()) {
                throw InputError("flow measurement " + std::to_string(m.at_bus) + "->" +
                                 std::to_string(m.to_bus) + " has no branch");
            }
            for (const std::size_t k : between) add_term(k);
            break;
        }
        case MeasurementKind::v_magnitude:
        case MeasurementKind::v_angle:
            break;
    }
    return row;
}

double MeasurementModel::evaluate_row(Half half, std::size_t index, const StateVector& x) const {
    const Row& row = rows(half)[index];
    const double v = x.vmag[row.bus];
    switch (row.kind) {
        case MeasurementKind::v_angle: return x.angle[row.bus];
        case MeasurementKind::v_magnitude: return v;
        default: break;
    }
    const bool real_part = row.kind == MeasurementKind::p_injection || row.kind == MeasurementKind::p_flow;
    double sum = 0.0;
    if (row.kind == MeasurementKind::p_injection) sum = row.shunt * v * v;
    if (row.kind == MeasurementKind::q_injection) sum = -row.shunt * v * v;
    for (const Term& t : row.terms) {
        const EndFlow f = end_flow(t.y, x.vmag[t.a], x.vmag[t.b], x.angle[t.a] - x.angle[t.b]);
        sum += real_part ? f.p : f.q;
    }
    return sum;
}

std::vector<double> MeasurementModel::evaluate(Half half, const StateVector& x, ThreadPool* pool) const {
    const auto& groups = set_->groups(half);
    std::vector<double> h(rows(half).size());
    for_each_chunk(pool, groups.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t gi = begin; gi < end; ++gi) {
            for (std::size_t r = groups[gi].begin; r < groups[gi].end; ++r) h[r] = evaluate_row(half, r, x);
        }
    }, 16);
    return h;
}

NodeJacobian MeasurementModel::node_jacobian(Half half, std::size_t group, const StateVector& point,
                                             const std::vector<int>& column_of_bus) const {
    const BusGroup& grp = set_->groups(half)[group];
    const auto& all_rows = rows(half);

    NodeJacobian jac;
    jac.bus = grp.bus;
    jac.first_row = grp.begin;
    jac.rows = grp.end - grp.begin;

    // Column support: the group's bus and every far end its rows touch.
    std::vector<std::size_t> buses;
    for (std::size_t r = grp.begin; r < grp.end; ++r) {
        buses.push_back(all_rows[r].bus);
        for (const Term& t : all_rows[r].terms) buses.push_back(t.b);
    }
    for (const std::size_t b : buses) {
        if (column_of_bus[b] >= 0) jac.columns.push_back(column_of_bus[b]);
    }
    std::sort(jac.columns.begin(), jac.columns.end());
    jac.columns.erase(std::unique(jac.columns.begin(), jac.columns.end()), jac.columns.end());
    jac.values.assign(jac.rows * jac.columns.size(), 0.0);

    auto add = [&](std::size_t row, std::size_t bus, double value) {
        const int col = column_of_bus[bus];
        if (col < 0) return;
        const auto pos = std::lower_bound(jac.columns.begin(), jac.columns.end(), col) - jac.columns.begin();
        jac.values[row * jac.columns.size() + static_cast<std::size_t>(pos)] += value;
    };

    for (std::size_t r = grp.begin; r < grp.end; ++r) {
        const Row& row = all_rows[r];
        const std::size_t local = r - grp.begin;
        switch (row.kind) {
            case MeasurementKind::v_angle:
            case MeasurementKind::v_magnitude:
                add(local, row.bus, 1.0);
                continue;
            case MeasurementKind::q_injection:
                add(local, row.bus, -2.0 * row.shunt * point.vmag[row.bus]);
                break;
            case MeasurementKind::p_injection:
                // shunt conductance does not depend on angles
                break;
            default:
                break;
        }
        for (const Term& t : row.terms) {
            const EndFlowDerivatives d = end_flow_derivatives(
                t.y, point.vmag[t.a], point.vmag[t.b], point.angle[t.a] - point.angle[t.b]);
            switch (row.kind) {
                case MeasurementKind::p_injection:
                case MeasurementKind::p_flow:
                    add(local, t.a, d.dp_dtheta_a);
                    add(local, t.b, -d.dp_dtheta_a);
                    break;
                case MeasurementKind::q_injection:
                case MeasurementKind::q_flow:
                    add(local, t.a, d.dq_dva);
                    add(local, t.b, d.dq_dvb);
                    break;
                default:
                    break;
            }
        }
    }
    return jac;
}

}  // namespace gridse
