#include <complex>
#include <vector>

#include "gridse/error.hpp"
#include "oracle.hpp"

namespace gridse::oracle {

namespace {

using Cx = std::complex<double>;

struct BranchBlock {
    Cx ff, ft, tf, tt;
};

BranchBlock two_port(const Branch& br) {
    const Cx ys = 1.0 / Cx(br.r, br.x);
    const Cx half_charging(0.0, br.b_charging / 2.0);
    const Cx tap = std::polar(br.tap_ratio, br.phase_shift);
    return {(ys + half_charging) / (br.tap_ratio * br.tap_ratio), -ys / std::conj(tap), -ys / tap, ys + half_charging};
}

Eigen::VectorXcd phasors(const StateVector& x) {
    Eigen::VectorXcd v(static_cast<Eigen::Index>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) v[static_cast<Eigen::Index>(i)] = std::polar(x.vmag[i], x.angle[i]);
    return v;
}

// A measured complex power S = V_a conj(sum_k y_k V_k) over a short list of
// (bus, admittance) pairs.
struct PowerRow {
    Eigen::Index at = 0;
    std::vector<std::pair<Eigen::Index, Cx>> terms;
};

PowerRow power_row(const NetworkGraph& graph, const Eigen::MatrixXcd& y, const Measurement& m) {
    PowerRow row;
    row.at = static_cast<Eigen::Index>(graph.index_of(m.at_bus));
    if (is_flow(m.kind)) {
        const auto far = static_cast<Eigen::Index>(graph.index_of(m.to_bus));
        Cx self = 0.0;
        Cx mutual = 0.0;
        for (const std::size_t k : graph.branches_between(m.at_bus, m.to_bus)) {
            const Branch& br = graph.branches()[k];
            const BranchBlock b = two_port(br);
            if (br.from_bus == m.at_bus) {
                self += b.ff;
                mutual += b.ft;
            } else {
                self += b.tt;
                mutual += b.tf;
            }
        }
        row.terms = {{row.at, self}, {far, mutual}};
    } else {
        for (Eigen::Index j = 0; j < y.cols(); ++j) {
            if (y(row.at, j) != Cx(0.0)) row.terms.emplace_back(j, y(row.at, j));
        }
    }
    return row;
}

std::vector<Measurement> ordered(const MeasurementSet& set) {
    std::vector<Measurement> rows = set.active();
    rows.insert(rows.end(), set.reactive().begin(), set.reactive().end());
    return rows;
}

bool is_real_part(MeasurementKind k) { return k == MeasurementKind::p_injection || k == MeasurementKind::p_flow; }

}  // namespace

Eigen::MatrixXcd admittance_matrix(const NetworkGraph& graph) {
    const auto n = static_cast<Eigen::Index>(graph.bus_count());
    Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Bus& b = graph.buses()[static_cast<std::size_t>(i)];
        y(i, i) += Cx(b.shunt_g, b.shunt_b);
    }
    for (const Branch& br : graph.branches()) {
        if (!br.in_service) continue;
        const auto f = static_cast<Eigen::Index>(graph.index_of(br.from_bus));
        const auto t = static_cast<Eigen::Index>(graph.index_of(br.to_bus));
        const BranchBlock b = two_port(br);
        y(f, f) += b.ff;
        y(f, t) += b.ft;
        y(t, f) += b.tf;
        y(t, t) += b.tt;
    }
    return y;
}

Eigen::VectorXcd bus_injections(const NetworkGraph& graph, const StateVector& x) {
    const Eigen::VectorXcd v = phasors(x);
    const Eigen::VectorXcd current = admittance_matrix(graph) * v;
    return v.cwiseProduct(current.conjugate());
}

Eigen::VectorXd measurement_values(const NetworkGraph& graph, const MeasurementSet& set, const StateVector& x) {
    const Eigen::MatrixXcd y = admittance_matrix(graph);
    const Eigen::VectorXcd v = phasors(x);
    const std::vector<Measurement> rows = ordered(set);
    Eigen::VectorXd h(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const Measurement& m = rows[r];
        const std::size_t i = graph.index_of(m.at_bus);
        double value = 0.0;
        if (m.kind == MeasurementKind::v_magnitude) {
            value = x.vmag[i];
        } else if (m.kind == MeasurementKind::v_angle) {
            value = x.angle[i];
        } else {
            const PowerRow pr = power_row(graph, y, m);
            Cx current = 0.0;
            for (const auto& [j, yj] : pr.terms) current += yj * v[j];
            const Cx s = v[pr.at] * std::conj(current);
            value = is_real_part(m.kind) ? s.real() : s.imag();
        }
        h[static_cast<Eigen::Index>(r)] = value;
    }
    return h;
}

Eigen::MatrixXd measurement_jacobian(const NetworkGraph& graph, const MeasurementSet& set, const StateVector& x) {
    const auto n = static_cast<Eigen::Index>(graph.bus_count());
    const auto slack = static_cast<Eigen::Index>(graph.slack_index());
    auto angle_col = [&](Eigen::Index i) { return i < slack ? i : i - 1; };
    auto vmag_col = [&](Eigen::Index i) { return n - 1 + i; };

    const Eigen::MatrixXcd y = admittance_matrix(graph);
    const Eigen::VectorXcd v = phasors(x);
    const std::vector<Measurement> rows = ordered(set);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), 2 * n - 1);

    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto ri = static_cast<Eigen::Index>(r);
        const Measurement& m = rows[r];
        const auto a = static_cast<Eigen::Index>(graph.index_of(m.at_bus));
        if (m.kind == MeasurementKind::v_magnitude) {
            h(ri, vmag_col(a)) = 1.0;
            continue;
        }
        if (m.kind == MeasurementKind::v_angle) {
            if (a != slack) h(ri, angle_col(a)) = 1.0;
            continue;
        }
        const PowerRow pr = power_row(graph, y, m);
        Cx current = 0.0;
        for (const auto& [j, yj] : pr.terms) current += yj * v[j];
        const Cx s = v[a] * std::conj(current);
        const bool real = is_real_part(m.kind);
        auto put = [&](Eigen::Index col, Cx d) { h(ri, col) += real ? d.real() : d.imag(); };
        // dS/dtheta_a carries j S from the leading V_a.
        if (a != slack) put(angle_col(a), Cx(0.0, 1.0) * s);
        put(vmag_col(a), s / std::abs(v[a]));
        for (const auto& [k, yk] : pr.terms) {
            const Cx dv_dtheta = Cx(0.0, 1.0) * v[k];
            const Cx dv_dmag = v[k] / std::abs(v[k]);
            if (k != slack) put(angle_col(k), v[a] * std::conj(yk * dv_dtheta));
            put(vmag_col(k), v[a] * std::conj(yk * dv_dmag));
        }
    }
    return h;
}

Eigen::MatrixXd dense_gain(const NetworkGraph& graph, const MeasurementSet& set, const StateVector& x, Half half) {
    const Eigen::MatrixXd h = measurement_jacobian(graph, set, x);
    const auto n = static_cast<Eigen::Index>(graph.bus_count());
    const auto m_active = static_cast<Eigen::Index>(set.active().size());
    const auto m_reactive = static_cast<Eigen::Index>(set.reactive().size());
    const std::vector<double> w = set.weights(half);
    const Eigen::Map<const Eigen::VectorXd> weights(w.data(), static_cast<Eigen::Index>(w.size()));
    const Eigen::MatrixXd block = half == Half::active ? h.block(0, 0, m_active, n - 1)
                                                       : h.block(m_active, n - 1, m_reactive, n);
    return block.transpose() * weights.asDiagonal() * block;
}

}  // namespace gridse::oracle
