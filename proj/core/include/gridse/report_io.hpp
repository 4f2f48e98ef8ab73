#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "gridse/runner.hpp"

namespace gridse {

/// Area report as JSON:
///   {area_id, converged, iterations, objective, initial_objective,
///    reference_angle_deg, states: [{bus, vmag_pu, angle_deg}],
///    trace: [{k, max_dtheta, max_dvmag}]}
/// Area states stay in the area frame; reference_angle_deg moves them to
/// the global frame.
void write_estimation_json(const EstimationReport& report, double reference_angle, std::ostream& out);

/// Global report: {converged, worker_count, wall_ms, max_cross_check_residual,
/// phases: {assembly_ms, factorization_ms, iteration_ms}, areas: [...],
/// states: [{bus, vmag_pu, angle_deg}]} with merged states in the global frame.
void write_report_json(const GlobalReport& report, std::ostream& out);

/// Merged states and the convergence flag of a global report.
struct ReportSummary {
    bool converged = false;
    std::vector<BusState> states;
};
/// Throws InputError on malformed JSON or missing keys.
ReportSummary read_report_json(std::istream& in);

/// Mean squared error against a case's true state, angles in degrees².
struct StateError {
    double angle_mse_deg2 = 0.0;
    double vmag_mse_pu2 = 0.0;
};
/// Every bus of `graph` must appear in `states` and carry a true state;
/// otherwise InputError.
StateError state_error(const NetworkGraph& graph, std::span<const BusState> states);

}  // namespace gridse
