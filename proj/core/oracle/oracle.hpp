#pragma once

// Dense reference engines for tests. Small systems only.

#include <Eigen/Dense>

#include "gridse/estimator.hpp"
#include "gridse/measurement.hpp"
#include "gridse/network.hpp"

namespace gridse::oracle {

/// Bus admittance matrix in bus-index order, shunts on the diagonal.
Eigen::MatrixXcd admittance_matrix(const NetworkGraph& graph);

/// Complex bus injections V .* conj(Y V).
Eigen::VectorXcd bus_injections(const NetworkGraph& graph, const StateVector& x);

/// h(x) for the active half followed by the reactive half.
Eigen::VectorXd measurement_values(const NetworkGraph& graph, const MeasurementSet& set, const StateVector& x);

/// Full Jacobian, rows like measurement_values, columns: the angles of all
/// non-slack buses in bus order, then every magnitude.
Eigen::MatrixXd measurement_jacobian(const NetworkGraph& graph, const MeasurementSet& set, const StateVector& x);

/// H^T W H of one decoupled block of the full Jacobian at `x`.
Eigen::MatrixXd dense_gain(const NetworkGraph& graph, const MeasurementSet& set, const StateVector& x, Half half);

/// Polar Newton-Raphson on the scheduled injections and voltage set-points.
/// Stops when the largest mismatch is at most `tolerance`; throws
/// DivergenceError otherwise.
StateVector newton_powerflow(const NetworkGraph& graph, double tolerance = 1e-10, int max_iterations = 30);

/// Gauss-Newton WLS with the full Jacobian rebuilt every iteration and a
/// dense Cholesky of the gain. Throws NumericalError on a singular gain.
EstimationReport full_newton_wls(const NetworkGraph& graph, const MeasurementSet& set, const SolverOptions& options);

}  // namespace gridse::oracle
