#include "gridse/report_io.hpp"

#include <algorithm>
#include <istream>
#include <ostream>

#include "gridse/error.hpp"
#include "gridse/units.hpp"
#include "json.hpp"

namespace gridse {

using nlohmann::json;

namespace {

json state_json(int bus, double vmag, double angle) {
    return {{"bus", bus}, {"vmag_pu", vmag}, {"angle_deg", rad_to_deg_exact(angle)}};
}

json area_json(const EstimationReport& r, double reference_angle) {
    json states = json::array();
    for (std::size_t i = 0; i < r.bus_ids.size(); ++i) {
        states.push_back(state_json(r.bus_ids[i], r.state.vmag[i], r.state.angle[i]));
    }
    json trace = json::array();
    for (const IterationTrace& t : r.trace) {
        trace.push_back({{"k", t.k}, {"max_dtheta", t.max_dtheta}, {"max_dvmag", t.max_dvmag}});
    }
    return {{"area_id", r.area_id},
            {"converged", r.converged},
            {"iterations", r.iterations},
            {"objective", r.objective},
            {"initial_objective", r.initial_objective},
            {"reference_angle_deg", rad_to_deg_exact(reference_angle)},
            {"states", std::move(states)},
            {"trace", std::move(trace)}};
}

}  // namespace

void write_estimation_json(const EstimationReport& report, double reference_angle, std::ostream& out) {
    out << area_json(report, reference_angle).dump(2) << '\n';
}

void write_report_json(const GlobalReport& report, std::ostream& out) {
    json areas = json::array();
    for (std::size_t a = 0; a < report.areas.size(); ++a) {
        const double offset = a < report.frame_offsets.size() ? report.frame_offsets[a] : 0.0;
        areas.push_back(area_json(report.areas[a], offset));
    }
    json states = json::array();
    for (const BusState& s : report.merged) states.push_back(state_json(s.bus, s.vmag, s.angle));
    const json doc = {{"converged", report.converged()},
                      {"worker_count", report.worker_count},
                      {"wall_ms", report.wall_ms},
                      {"max_cross_check_residual", report.max_cross_check_residual},
                      {"phases",
                       {{"assembly_ms", report.times.assembly_ms},
                        {"factorization_ms", report.times.factorization_ms},
                        {"iteration_ms", report.times.iteration_ms}}},
                      {"areas", std::move(areas)},
                      {"states", std::move(states)}};
    out << doc.dump(2) << '\n';
}

ReportSummary read_report_json(std::istream& in) {
    ReportSummary summary;
    try {
        const json doc = json::parse(in);
        summary.converged = doc.at("converged").get<bool>();
        for (const json& s : doc.at("states")) {
            summary.states.push_back({s.at("bus").get<int>(), s.at("vmag_pu").get<double>(),
                                      deg_to_rad(s.at("angle_deg").get<double>())});
        }
    } catch (const json::exception& e) {
        throw InputError(std::string("report: ") + e.what());
    }
    std::sort(summary.states.begin(), summary.states.end(),
              [](const BusState& x, const BusState& y) { return x.bus < y.bus; });
    return summary;
}

StateError state_error(const NetworkGraph& graph, std::span<const BusState> states) {
    if (!graph.has_truth()) throw InputError("case carries no true state");
    std::vector<const BusState*> by_index(graph.bus_count(), nullptr);
    for (const BusState& s : states) {
        if (!graph.contains(s.bus)) throw InputError("report names unknown bus " + std::to_string(s.bus));
        by_index[graph.index_of(s.bus)] = &s;
    }
    StateError err;
    for (std::size_t i = 0; i < graph.bus_count(); ++i) {
        const Bus& b = graph.buses()[i];
        if (by_index[i] == nullptr) throw InputError("report lacks bus " + std::to_string(b.id));
        const double da = rad_to_deg(by_index[i]->angle) - rad_to_deg(*b.true_angle);
        const double dv = by_index[i]->vmag - *b.true_vmag;
        err.angle_mse_deg2 += da * da;
        err.vmag_mse_pu2 += dv * dv;
    }
    const auto n = static_cast<double>(graph.bus_count());
    err.angle_mse_deg2 /= n;
    err.vmag_mse_pu2 /= n;
    return err;
}

}  // namespace gridse
