#include <algorithm>
#include <cmath>
#include <vector>

#include "gridse/error.hpp"
#include "oracle.hpp"

namespace gridse::oracle {

StateVector newton_powerflow(const NetworkGraph& graph, double tolerance, int max_iterations) {
    const std::size_t n = graph.bus_count();
    StateVector x = StateVector::flat(n);
    std::vector<Eigen::Index> angle_unknowns;
    std::vector<Eigen::Index> vmag_unknowns;
    for (std::size_t i = 0; i < n; ++i) {
        const Bus& b = graph.buses()[i];
        if (b.kind != BusKind::load) x.vmag[i] = b.v_set;
        if (b.kind == BusKind::slack) x.angle[i] = b.true_angle.value_or(0.0);
        if (b.kind != BusKind::slack) angle_unknowns.push_back(static_cast<Eigen::Index>(i));
        if (b.kind == BusKind::load) vmag_unknowns.push_back(static_cast<Eigen::Index>(i));
    }
    const auto na = static_cast<Eigen::Index>(angle_unknowns.size());
    const auto nv = static_cast<Eigen::Index>(vmag_unknowns.size());
    const Eigen::MatrixXcd y = admittance_matrix(graph);

    for (int iter = 0; iter <= max_iterations; ++iter) {
        Eigen::VectorXcd v(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) v[static_cast<Eigen::Index>(i)] = std::polar(x.vmag[i], x.angle[i]);
        const Eigen::VectorXcd current = y * v;
        const Eigen::VectorXcd s = v.cwiseProduct(current.conjugate());

        Eigen::VectorXd mismatch(na + nv);
        for (Eigen::Index k = 0; k < na; ++k) {
            const Eigen::Index i = angle_unknowns[static_cast<std::size_t>(k)];
            mismatch[k] = s[i].real() - graph.buses()[static_cast<std::size_t>(i)].p_sched;
        }
        for (Eigen::Index k = 0; k < nv; ++k) {
            const Eigen::Index i = vmag_unknowns[static_cast<std::size_t>(k)];
            mismatch[na + k] = s[i].imag() - graph.buses()[static_cast<std::size_t>(i)].q_sched;
        }
        if (mismatch.size() == 0 || mismatch.lpNorm<Eigen::Infinity>() <= tolerance) return x;
        if (iter == max_iterations) break;

        // dS/dtheta = j diag(V) conj(diag(I) - Y diag(V)),
        // dS/d|V|   = diag(V) conj(Y diag(V/|V|)) + conj(diag(I)) diag(V/|V|).
        const Eigen::VectorXcd unit = v.cwiseQuotient(v.cwiseAbs().cast<std::complex<double>>());
        const Eigen::MatrixXcd ds_dtheta =
            std::complex<double>(0.0, 1.0) * v.asDiagonal() *
            (Eigen::MatrixXcd(current.asDiagonal()) - y * v.asDiagonal()).conjugate();
        const Eigen::MatrixXcd ds_dvmag = v.asDiagonal() * (y * unit.asDiagonal()).conjugate() +
                                          Eigen::MatrixXcd(current.conjugate().asDiagonal()) * unit.asDiagonal();

        Eigen::MatrixXd jac(na + nv, na + nv);
        for (Eigen::Index r = 0; r < na + nv; ++r) {
            const bool p_row = r < na;
            const Eigen::Index i = p_row ? angle_unknowns[static_cast<std::size_t>(r)]
                                         : vmag_unknowns[static_cast<std::size_t>(r - na)];
            for (Eigen::Index c = 0; c < na + nv; ++c) {
                const std::complex<double> d = c < na ? ds_dtheta(i, angle_unknowns[static_cast<std::size_t>(c)])
                                                      : ds_dvmag(i, vmag_unknowns[static_cast<std::size_t>(c - na)]);
                jac(r, c) = p_row ? d.real() : d.imag();
            }
        }
        const Eigen::VectorXd step = jac.partialPivLu().solve(-mismatch);
        if (!step.allFinite()) break;
        for (Eigen::Index k = 0; k < na; ++k) x.angle[static_cast<std::size_t>(angle_unknowns[static_cast<std::size_t>(k)])] += step[k];
        for (Eigen::Index k = 0; k < nv; ++k) x.vmag[static_cast<std::size_t>(vmag_unknowns[static_cast<std::size_t>(k)])] += step[na + k];
    }
    throw DivergenceError("power flow did not converge in " + std::to_string(max_iterations) + " iterations");
}

EstimationReport full_newton_wls(const NetworkGraph& graph, const MeasurementSet& set, const SolverOptions& options) {
    options.validate();
    const std::size_t n = graph.bus_count();
    const std::size_t slack = graph.slack_index();
    std::vector<double> w = set.weights(Half::active);
    const std::vector<double> wr = set.weights(Half::reactive);
    w.insert(w.end(), wr.begin(), wr.end());
    const Eigen::Map<const Eigen::VectorXd> weights(w.data(), static_cast<Eigen::Index>(w.size()));
    std::vector<double> z;
    for (const Measurement& m : set.active()) z.push_back(m.value);
    for (const Measurement& m : set.reactive()) z.push_back(m.value);
    const Eigen::Map<const Eigen::VectorXd> measured(z.data(), static_cast<Eigen::Index>(z.size()));

    EstimationReport report;
    for (const Bus& b : graph.buses()) report.bus_ids.push_back(b.id);
    StateVector x = StateVector::flat(n);
    auto cost = [&](const StateVector& s) {
        const Eigen::VectorXd r = measured - measurement_values(graph, set, s);
        return r.dot(weights.asDiagonal() * r);
    };
    report.initial_objective = cost(x);

    for (int k = 1; k <= options.max_iterations; ++k) {
        const Eigen::MatrixXd h = measurement_jacobian(graph, set, x);
        const Eigen::VectorXd r = measured - measurement_values(graph, set, x);
        const Eigen::MatrixXd gain = h.transpose() * weights.asDiagonal() * h;
        const Eigen::LLT<Eigen::MatrixXd> llt(gain);
        if (llt.info() != Eigen::Success) throw NumericalError("gain matrix is not positive definite");
        const Eigen::VectorXd dx = llt.solve(h.transpose() * weights.asDiagonal() * r);

        double max_dtheta = 0.0;
        double max_dvmag = 0.0;
        Eigen::Index col = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (i == slack) continue;
            x.angle[i] += dx[col];
            max_dtheta = std::max(max_dtheta, std::abs(dx[col]));
            ++col;
        }
        for (std::size_t i = 0; i < n; ++i, ++col) {
            x.vmag[i] += dx[col];
            max_dvmag = std::max(max_dvmag, std::abs(dx[col]));
        }
        report.trace.push_back({k, max_dtheta, max_dvmag});
        report.iterations = k;
        if (max_dtheta <= options.eps_theta && max_dvmag <= options.eps_v) {
            report.converged = true;
            break;
        }
    }
    report.state = x;
    report.objective = cost(x);
    return report;
}

}  // namespace gridse::oracle
