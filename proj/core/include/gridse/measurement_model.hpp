#pragma once

#include <cstddef>
#include <vector>

#include "gridse/measurement.hpp"
#include "gridse/power_equations.hpp"

namespace gridse {

class ThreadPool;

/// Rows of one bus group differentiated against the angle states (active
/// half) or the voltage-magnitude states (reactive half). Columns are state
/// columns, ascending; the values are row-major rows x columns.
struct NodeJacobian {
    int bus = 0;
    std::size_t first_row = 0;  // offset of the group inside its half
    std::size_t rows = 0;
    std::vector<int> columns;
    std::vector<double> values;

    double at(std::size_t row, std::size_t col) const { return values[row * columns.size() + col]; }
};

/// Measurement functions h(x) of a MeasurementSet bound to a graph. Every
/// row touches only its own bus, that bus's neighbours and the branches in
/// between.
class MeasurementModel {
  public:
    MeasurementModel(const NetworkGraph& graph, const MeasurementSet& set);

    const NetworkGraph& graph() const noexcept { return *graph_; }
    const MeasurementSet& set() const noexcept { return *set_; }

    double evaluate_row(Half half, std::size_t row, const StateVector& x) const;

    /// h for one half, ordered like set().half(half).
    std::vector<double> evaluate(Half half, const StateVector& x, ThreadPool* pool = nullptr) const;

    /// Jacobian block of bus group `group` at `point`. `column_of_bus` maps a
    /// bus index to its state column, or -1 for an eliminated state.
    NodeJacobian node_jacobian(Half half, std::size_t group, const StateVector& point,
                               const std::vector<int>& column_of_bus) const;

  private:
    struct Term {
        std::size_t a = 0;  // measuring end
        std::size_t b = 0;  // far end
        EndAdmittance y;
    };
    struct Row {
        MeasurementKind kind = MeasurementKind::p_injection;
        std::size_t bus = 0;
        double shunt = 0.0;  // G for P injections, B for Q injections
        std::vector<Term> terms;
    };

    const std::vector<Row>& rows(Half half) const { return half == Half::active ? active_ : reactive_; }
    Row make_row(const Measurement& m, const std::vector<BranchAdmittance>& y) const;

    const NetworkGraph* graph_;
    const MeasurementSet* set_;
    std::vector<Row> active_;
    std::vector<Row> reactive_;
};

}  // namespace gridse
