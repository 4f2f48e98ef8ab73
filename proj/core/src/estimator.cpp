#include "gridse/estimator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "gridse/error.hpp"
#include "gridse/parallel.hpp"

namespace gridse {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
    return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (const double x : v) m = std::max(m, std::abs(x));
    return m;
}

std::vector<double> residuals(std::span<const Measurement> rows, std::span<const double> h) {
    std::vector<double> r(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) r[i] = rows[i].value - h[i];
    return r;
}

}  // namespace

void SolverOptions::validate() const {
    if (!(eps_theta > 0.0) || !(eps_v > 0.0)) throw InputError("convergence thresholds must be positive");
    if (max_iterations < 1) throw InputError("max_iterations must be at least 1");
}

bool EstimationReport::same_result(const EstimationReport& other) const {
    return area_id == other.area_id && bus_ids == other.bus_ids && state == other.state &&
           iterations == other.iterations && objective == other.objective &&
           initial_objective == other.initial_objective && trace == other.trace && converged == other.converged;
}

std::vector<int> state_columns(const NetworkGraph& graph, Half half) {
    std::vector<int> columns(graph.bus_count());
    int next = 0;
    for (std::size_t i = 0; i < graph.bus_count(); ++i) {
        columns[i] = half == Half::active && i == graph.slack_index() ? -1 : next++;
    }
    return columns;
}

NodeGain node_gain(const NodeJacobian& jac, std::span<const double> weights) {
    if (weights.size() != jac.rows) throw InputError("node gain: weight count does not match Jacobian rows");
    const std::size_t c = jac.columns.size();
    NodeGain g;
    g.bus = jac.bus;
    g.columns = jac.columns;
    g.block.assign(c * c, 0.0);
    for (std::size_t r = 0; r < jac.rows; ++r) {
        const double w = weights[r];
        for (std::size_t a = 0; a < c; ++a) {
            const double ha = jac.at(r, a);
            if (ha == 0.0) continue;
            for (std::size_t b = 0; b < c; ++b) g.block[a * c + b] += ha * w * jac.at(r, b);
        }
    }
    return g;
}

SparseSpd assemble_gain(std::span<const NodeGain> node_gains, int order, ThreadPool* pool) {
    // Node gains in ascending bus id fix the summation order of every entry.
    std::vector<std::size_t> by_bus(node_gains.size());
    std::iota(by_bus.begin(), by_bus.end(), 0);
    std::stable_sort(by_bus.begin(), by_bus.end(),
                     [&](std::size_t a, std::size_t b) { return node_gains[a].bus < node_gains[b].bus; });

    struct Source {
        std::size_t node;
        std::size_t local;
    };
    std::vector<std::vector<Source>> sources(static_cast<std::size_t>(order));
    for (const std::size_t n : by_bus) {
        const auto& cols = node_gains[n].columns;
        for (std::size_t a = 0; a < cols.size(); ++a) {
            if (cols[a] < 0 || cols[a] >= order) throw InputError("node gain column out of range");
            sources[static_cast<std::size_t>(cols[a])].push_back({n, a});
        }
    }

    std::vector<std::vector<std::pair<int, double>>> columns(static_cast<std::size_t>(order));
    for_each_chunk(pool, static_cast<std::size_t>(order), [&](std::size_t begin, std::size_t end) {
        for (std::size_t j = begin; j < end; ++j) {
            auto& col = columns[j];
            for (const Source& s : sources[j]) {
                const NodeGain& g = node_gains[s.node];
                const std::size_t c = g.columns.size();
                for (std::size_t b = 0; b < c; ++b) {
                    if (g.columns[b] >= static_cast<int>(j)) col.emplace_back(g.columns[b], g.block[b * c + s.local]);
                }
            }
            std::stable_sort(col.begin(), col.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
            std::size_t out = 0;
            for (std::size_t p = 0; p < col.size(); ++p) {
                if (out > 0 && col[out - 1].first == col[p].first) {
                    col[out - 1].second += col[p].second;
                } else {
                    col[out++] = col[p];
                }
            }
            col.resize(out);
        }
    }, 32);

    std::vector<int> col_ptr{0};
    std::vector<int> row_idx;
    std::vector<double> values;
    for (const auto& col : columns) {
        for (const auto& [row, value] : col) {
            row_idx.push_back(row);
            values.push_back(value);
        }
        col_ptr.push_back(static_cast<int>(row_idx.size()));
    }
    return SparseSpd(order, std::move(col_ptr), std::move(row_idx), std::move(values));
}

RhsAssembler::RhsAssembler(std::span<const NodeJacobian> jacobians, int order)
    : jacobians_(jacobians), order_(order), by_column_(static_cast<std::size_t>(order)) {
    std::vector<std::size_t> by_bus(jacobians.size());
    std::iota(by_bus.begin(), by_bus.end(), 0);
    std::stable_sort(by_bus.begin(), by_bus.end(),
                     [&](std::size_t a, std::size_t b) { return jacobians[a].bus < jacobians[b].bus; });
    for (const std::size_t n : by_bus) {
        for (std::size_t a = 0; a < jacobians[n].columns.size(); ++a) {
            by_column_[static_cast<std::size_t>(jacobians[n].columns[a])].push_back({n, a});
        }
    }
}

std::vector<double> RhsAssembler::operator()(std::span<const double> weights, std::span<const double> residuals,
                                             ThreadPool* pool) const {
    // Per-node pieces H_i^T W_i r_i, then a per-column reduction.
    std::vector<std::vector<double>> pieces(jacobians_.size());
    for_each_chunk(pool, jacobians_.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t n = begin; n < end; ++n) {
            const NodeJacobian& jac = jacobians_[n];
            auto& piece = pieces[n];
            piece.assign(jac.columns.size(), 0.0);
            for (std::size_t r = 0; r < jac.rows; ++r) {
                const double wr = weights[jac.first_row + r] * residuals[jac.first_row + r];
                for (std::size_t a = 0; a < jac.columns.size(); ++a) piece[a] += jac.at(r, a) * wr;
            }
        }
    }, 32);
    std::vector<double> rhs(static_cast<std::size_t>(order_), 0.0);
    for_each_chunk(pool, rhs.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t j = begin; j < end; ++j) {
            double sum = 0.0;
            for (const Contribution& c : by_column_[j]) sum += pieces[c.node][c.local_column];
            rhs[j] = sum;
        }
    }, 256);
    return rhs;
}

std::vector<double> rhs_update(std::span<const NodeJacobian> jacobians, std::span<const double> weights,
                               std::span<const double> residuals, int order, ThreadPool* pool) {
    return RhsAssembler(jacobians, order)(weights, residuals, pool);
}

namespace {

GainHalf build_half(const MeasurementModel& model, Half half, const StateVector& point, ThreadPool* pool) {
    GainHalf out;
    out.column_of_bus = state_columns(model.graph(), half);
    for (std::size_t i = 0; i < out.column_of_bus.size(); ++i) {
        if (out.column_of_bus[i] >= 0) out.bus_of_column.push_back(static_cast<int>(i));
    }
    const auto& groups = model.set().groups(half);
    const std::vector<double> weights = model.set().weights(half);
    out.jacobians.resize(groups.size());
    std::vector<NodeGain> gains(groups.size());
    for_each_chunk(pool, groups.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t g = begin; g < end; ++g) {
            out.jacobians[g] = model.node_jacobian(half, g, point, out.column_of_bus);
            gains[g] = node_gain(out.jacobians[g], std::span(weights).subspan(groups[g].begin, out.jacobians[g].rows));
        }
    }, 16);
    out.matrix = assemble_gain(gains, out.order(), pool);
    return out;
}

void factorize_half(GainHalf& half, const NetworkGraph& graph, const char* what, ThreadPool* pool) {
    try {
        auto symbolic = std::make_shared<const SymbolicFactor>(symbolic_analyze(half.matrix));
        half.factors.emplace(factorize(half.matrix, std::move(symbolic), pool));
    } catch (const UnobservableError& e) {
        std::vector<int> buses;
        std::ostringstream msg;
        msg << "unobservable " << what << " states at buses";
        for (const int col : e.columns()) {
            const int id = graph.buses()[static_cast<std::size_t>(half.bus_of_column[static_cast<std::size_t>(col)])].id;
            buses.push_back(id);
            msg << ' ' << id;
        }
        msg << " (zero pivot)";
        throw UnobservableError(msg.str(), std::move(buses));
    }
}

}  // namespace

GainSystem build_gain_system(const MeasurementModel& model, const StateVector& point, ThreadPool* pool) {
    GainSystem g;
    g.active = build_half(model, Half::active, point, pool);
    g.reactive = build_half(model, Half::reactive, point, pool);
    return g;
}

void factorize_gain_system(GainSystem& gains, const NetworkGraph& graph, ThreadPool* pool) {
    factorize_half(gains.active, graph, "angle", pool);
    factorize_half(gains.reactive, graph, "voltage magnitude", pool);
}

double objective(const MeasurementModel& model, const StateVector& x, ThreadPool* pool) {
    double j = 0.0;
    for (const Half half : {Half::active, Half::reactive}) {
        const auto& rows = model.set().half(half);
        const auto h = model.evaluate(half, x, pool);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const double r = rows[i].value - h[i];
            j += rows[i].weight() * r * r;
        }
    }
    return j;
}

EstimationReport estimate(const NetworkGraph& graph, const MeasurementSet& set, const SolverOptions& options,
                          ThreadPool* pool) {
    options.validate();
    const std::size_t n = graph.bus_count();
    EstimationReport report;
    for (const Bus& b : graph.buses()) report.bus_ids.push_back(b.id);

    // Step 1: flat start.
    StateVector x = StateVector::flat(n);
    const MeasurementModel model(graph, set);
    report.initial_objective = objective(model, x, pool);

    // Steps 2-3: constant gains, built and factored once.
    auto t0 = Clock::now();
    StateVector point = x;
    if (options.jacobian_point == JacobianPoint::given_state) {
        if (options.given_point.size() != n || options.given_point.vmag.size() != n) {
            throw InputError("Jacobian point does not match the network");
        }
        point = options.given_point;
    }
    GainSystem gains = build_gain_system(model, point, pool);
    report.times.assembly_ms = elapsed_ms(t0);
    t0 = Clock::now();
    factorize_gain_system(gains, graph, pool);
    report.times.factorization_ms = elapsed_ms(t0);

    t0 = Clock::now();
    const RhsAssembler active_rhs(gains.active.jacobians, gains.active.order());
    const RhsAssembler reactive_rhs(gains.reactive.jacobians, gains.reactive.order());
    const std::vector<double> w_active = set.weights(Half::active);
    const std::vector<double> w_reactive = set.weights(Half::reactive);

    double last_dv = std::numeric_limits<double>::infinity();
    for (int k = 0; k < options.max_iterations; ++k) {
        // Steps 4-5: angle update.
        const auto r_active = residuals(set.active(), model.evaluate(Half::active, x, pool));
        const auto dtheta = gains.active.factors->solve(active_rhs(w_active, r_active, pool), pool);
        for (std::size_t c = 0; c < dtheta.size(); ++c) x.angle[gains.active.bus_of_column[c]] += dtheta[c];
        const double max_dtheta = max_abs(dtheta);
        report.iterations = k + 1;

        // Step 6: test with the previous magnitude step.
        if (max_dtheta <= options.eps_theta && last_dv <= options.eps_v) {
            report.trace.push_back({k, max_dtheta, last_dv});
            report.converged = true;
            break;
        }

        // Steps 7-8: magnitude update at the new angles.
        const auto r_reactive = residuals(set.reactive(), model.evaluate(Half::reactive, x, pool));
        const auto dv = gains.reactive.factors->solve(reactive_rhs(w_reactive, r_reactive, pool), pool);
        for (std::size_t c = 0; c < dv.size(); ++c) x.vmag[gains.reactive.bus_of_column[c]] += dv[c];
        last_dv = max_abs(dv);
        report.trace.push_back({k, max_dtheta, last_dv});

        // Step 9.
        if (max_dtheta <= options.eps_theta && last_dv <= options.eps_v) {
            report.converged = true;
            break;
        }
        if (!std::isfinite(max_dtheta) || !std::isfinite(last_dv)) break;
    }
    report.times.iteration_ms = elapsed_ms(t0);
    report.objective = objective(model, x, pool);
    report.state = std::move(x);
    return report;
}

EstimationReport estimate(const AreaNetwork& area, const MeasurementSet& set, const SolverOptions& options,
                          ThreadPool* pool) {
    EstimationReport report = estimate(area.graph, set, options, pool);
    report.area_id = area.area_id;
    return report;
}

}  // namespace gridse
