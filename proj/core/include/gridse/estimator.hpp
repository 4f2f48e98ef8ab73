#pragma once

#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "gridse/measurement.hpp"
#include "gridse/measurement_model.hpp"
#include "gridse/network.hpp"
#include "gridse/partition.hpp"
#include "gridse/sparse.hpp"

namespace gridse {

class ThreadPool;

enum class JacobianPoint { flat_start, given_state };

struct SolverOptions {
    double eps_theta = 1e-4;  // radians
    double eps_v = 1e-4;      // per-unit
    int max_iterations = 50;
    JacobianPoint jacobian_point = JacobianPoint::flat_start;
    StateVector given_point;  // used with JacobianPoint::given_state

    /// Throws InputError for non-positive thresholds or iteration limits.
    void validate() const;
};

struct IterationTrace {
    int k = 0;
    double max_dtheta = 0.0;
    double max_dvmag = 0.0;

    friend bool operator==(const IterationTrace&, const IterationTrace&) = default;
};

struct PhaseTimes {
    double assembly_ms = 0.0;
    double factorization_ms = 0.0;
    double iteration_ms = 0.0;

    PhaseTimes& operator+=(const PhaseTimes& other) {
        assembly_ms += other.assembly_ms;
        factorization_ms += other.factorization_ms;
        iteration_ms += other.iteration_ms;
        return *this;
    }
};

/// Result of one area. Angles are in the area frame (local slack at zero).
struct EstimationReport {
    int area_id = 0;
    std::vector<int> bus_ids;
    StateVector state;
    int iterations = 0;
    double objective = 0.0;
    double initial_objective = 0.0;
    std::vector<IterationTrace> trace;
    bool converged = false;
    PhaseTimes times;

    /// Everything except wall-clock timings.
    bool same_result(const EstimationReport& other) const;
};

/// Dense symmetric block G_i = H_i^T W_i H_i over a node's columns.
struct NodeGain {
    int bus = 0;
    std::vector<int> columns;
    std::vector<double> block;  // row-major columns x columns
};

/// State column of every bus: the slack is dropped from the angle half.
std::vector<int> state_columns(const NetworkGraph& graph, Half half);

/// `weights` holds the inverse variances of the Jacobian's rows.
NodeGain node_gain(const NodeJacobian& jac, std::span<const double> weights);

/// Sum of the node gains as an order x order sparse matrix. Each entry adds
/// its contributions in ascending bus id, whatever the input order.
SparseSpd assemble_gain(std::span<const NodeGain> node_gains, int order, ThreadPool* pool = nullptr);

/// Precomputed reduction of per-node right-hand-side pieces
///   RHS = sum_i H_i^T W_i r_i
/// in a fixed per-column order.
class RhsAssembler {
  public:
    RhsAssembler(std::span<const NodeJacobian> jacobians, int order);
    std::vector<double> operator()(std::span<const double> weights, std::span<const double> residuals,
                                   ThreadPool* pool = nullptr) const;

  private:
    struct Contribution {
        std::size_t node;
        std::size_t local_column;
    };
    std::span<const NodeJacobian> jacobians_;
    int order_;
    std::vector<std::vector<Contribution>> by_column_;
};

/// Convenience wrapper over RhsAssembler. `weights` and `residuals` cover a
/// whole half, aligned with the measurement set.
std::vector<double> rhs_update(std::span<const NodeJacobian> jacobians, std::span<const double> weights,
                               std::span<const double> residuals, int order, ThreadPool* pool = nullptr);

/// One decoupled half of the constant gain system.
struct GainHalf {
    std::vector<int> column_of_bus;  // -1 for the eliminated slack angle
    std::vector<int> bus_of_column;  // bus index per state column
    std::vector<NodeJacobian> jacobians;
    SparseSpd matrix;
    std::optional<CholeskyFactors> factors;

    int order() const { return static_cast<int>(bus_of_column.size()); }
};

struct GainSystem {
    GainHalf active;    // G_AA, order n-1
    GainHalf reactive;  // G_RR, order n
};

/// Node Jacobians and assembled gains of both halves at `point`.
GainSystem build_gain_system(const MeasurementModel& model, const StateVector& point, ThreadPool* pool = nullptr);

/// Cholesky of both halves. Throws UnobservableError whose columns are the
/// ids of the buses whose states could not be resolved.
void factorize_gain_system(GainSystem& gains, const NetworkGraph& graph, ThreadPool* pool = nullptr);

/// J(x) = sum over both halves of w (z - h(x))^2.
double objective(const MeasurementModel& model, const StateVector& x, ThreadPool* pool = nullptr);

/// Fast-decoupled WLS estimation with constant gains. Starts flat, builds
/// and factors both gains once, then alternates an angle update and a
/// magnitude update until both step sizes fall below their thresholds.
/// The magnitude test after the angle step uses the previous magnitude step.
EstimationReport estimate(const NetworkGraph& graph, const MeasurementSet& set, const SolverOptions& options,
                          ThreadPool* pool = nullptr);
EstimationReport estimate(const AreaNetwork& area, const MeasurementSet& set, const SolverOptions& options,
                          ThreadPool* pool = nullptr);

}  // namespace gridse
