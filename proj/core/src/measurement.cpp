#include "gridse/measurement.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include "gridse/error.hpp"
#include "gridse/measurement_model.hpp"
#include "gridse/text.hpp"
#include "gridse/units.hpp"

namespace gridse {

namespace {

constexpr std::pair<MeasurementKind, const char*> kKindNames[] = {
    {MeasurementKind::p_injection, "P_injection"}, {MeasurementKind::q_injection, "Q_injection"},
    {MeasurementKind::p_flow, "P_flow"},           {MeasurementKind::q_flow, "Q_flow"},
    {MeasurementKind::v_magnitude, "V_magnitude"}, {MeasurementKind::v_angle, "V_angle"},
};

bool measurement_less(const Measurement& a, const Measurement& b) {
    return std::tie(a.at_bus, a.kind, a.to_bus, a.value, a.sigma) <
           std::tie(b.at_bus, b.kind, b.to_bus, b.value, b.sigma);
}

std::vector<BusGroup> make_groups(const std::vector<Measurement>& rows) {
    std::vector<BusGroup> groups;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (groups.empty() || groups.back().bus != rows[i].at_bus) {
            groups.push_back({rows[i].at_bus, i, i});
        }
        groups.back().end = i + 1;
    }
    return groups;
}

}  // namespace

const char* to_string(MeasurementKind kind) {
    for (const auto& [k, name] : kKindNames) {
        if (k == kind) return name;
    }
    return "?";
}

MeasurementKind measurement_kind_from_string(const std::string& text) {
    for (const auto& [k, name] : kKindNames) {
        if (text == name) return k;
    }
    throw InputError("unknown measurement kind '" + text + "'");
}

double Sigmas::for_kind(MeasurementKind kind) const {
    switch (kind) {
        case MeasurementKind::v_magnitude: return vmag;
        case MeasurementKind::v_angle: return angle;
        default: return power;
    }
}

std::vector<double> MeasurementSet::weights(Half h) const {
    std::vector<double> w;
    w.reserve(half(h).size());
    for (const Measurement& m : half(h)) w.push_back(m.weight());
    return w;
}

std::vector<Measurement> MeasurementSet::all() const {
    std::vector<Measurement> out(active_);
    out.insert(out.end(), reactive_.begin(), reactive_.end());
    return out;
}

MeasurementSet group_by_bus(const NetworkGraph& graph, std::vector<Measurement> raw) {
    MeasurementSet set;
    for (Measurement& m : raw) {
        if (!graph.contains(m.at_bus)) {
            throw InputError("measurement at unknown bus " + std::to_string(m.at_bus));
        }
        if (!(m.sigma > 0.0)) {
            throw InputError("measurement at bus " + std::to_string(m.at_bus) + " has sigma <= 0");
        }
        if (is_flow(m.kind)) {
            if (graph.branches_between(m.at_bus, m.to_bus).empty()) {
                throw InputError("flow measurement " + std::to_string(m.at_bus) + "->" +
                                 std::to_string(m.to_bus) + " is not on an in-service branch");
            }
        } else {
            m.to_bus = 0;
        }
        (is_active(m.kind) ? set.active_ : set.reactive_).push_back(m);
    }
    std::sort(set.active_.begin(), set.active_.end(), measurement_less);
    std::sort(set.reactive_.begin(), set.reactive_.end(), measurement_less);
    set.active_groups_ = make_groups(set.active_);
    set.reactive_groups_ = make_groups(set.reactive_);
    return set;
}

StateVector truth_state(const NetworkGraph& graph) {
    StateVector x;
    for (const Bus& b : graph.buses()) {
        if (!b.true_vmag || !b.true_angle) {
            throw InputError("bus " + std::to_string(b.id) + " carries no solved voltage");
        }
        x.angle.push_back(*b.true_angle);
        x.vmag.push_back(*b.true_vmag);
    }
    return x;
}

MeasurementSet synthesize(const NetworkGraph& graph, const StateVector& truth,
                          const SynthesisOptions& options) {
    if (truth.size() != graph.bus_count() || truth.vmag.size() != graph.bus_count()) {
        throw InputError("state size does not match the network");
    }
    const CoveragePlan& plan = options.plan;
    auto sigma_for = [&](MeasurementKind kind) {
        const double noise = options.noise.for_kind(kind);
        return noise > 0.0 ? noise : options.weights.for_kind(kind);
    };

    std::vector<Measurement> raw;
    for (const Bus& b : graph.buses()) {
        if (plan.injections) {
            raw.push_back({MeasurementKind::p_injection, b.id, 0, 0.0, sigma_for(MeasurementKind::p_injection)});
            raw.push_back({MeasurementKind::q_injection, b.id, 0, 0.0, sigma_for(MeasurementKind::q_injection)});
        }
        if (plan.vmag) {
            raw.push_back({MeasurementKind::v_magnitude, b.id, 0, 0.0, sigma_for(MeasurementKind::v_magnitude)});
        }
    }
    // One flow per corridor end; the from end is that of the corridor's
    // lowest-index branch.
    std::set<std::pair<int, int>> corridors;
    for (const Branch& br : graph.branches()) {
        if (!br.in_service) continue;
        const auto key = std::minmax(br.from_bus, br.to_bus);
        if (!corridors.insert(key).second) continue;
        auto add_flow = [&](int at, int to) {
            raw.push_back({MeasurementKind::p_flow, at, to, 0.0, sigma_for(MeasurementKind::p_flow)});
            raw.push_back({MeasurementKind::q_flow, at, to, 0.0, sigma_for(MeasurementKind::q_flow)});
        };
        if (plan.flows_from_end) add_flow(br.from_bus, br.to_bus);
        if (plan.flows_to_end) add_flow(br.to_bus, br.from_bus);
    }

    MeasurementSet shaped = group_by_bus(graph, raw);
    const MeasurementModel model(graph, shaped);
    const std::vector<double> h_active = model.evaluate(Half::active, truth);
    const std::vector<double> h_reactive = model.evaluate(Half::reactive, truth);

    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> unit(0.0, 1.0);
    std::vector<Measurement> out;
    out.reserve(shaped.m_total());
    auto emit = [&](const std::vector<Measurement>& rows, const std::vector<double>& h) {
        for (std::size_t i = 0; i < rows.size(); ++i) {
            Measurement m = rows[i];
            const double noise = options.noise.for_kind(m.kind);
            m.value = h[i] + (noise > 0.0 ? noise * unit(rng) : 0.0);
            out.push_back(m);
        }
    };
    emit(shaped.active(), h_active);
    emit(shaped.reactive(), h_reactive);
    return group_by_bus(graph, std::move(out));
}

void write_measurements_csv(const MeasurementSet& set, std::ostream& out) {
    out << "kind,at_bus,to_bus,value,sigma\n";
    for (const Measurement& m : set.all()) {
        const bool angle = m.kind == MeasurementKind::v_angle;
        out << to_string(m.kind) << ',' << m.at_bus << ',';
        if (is_flow(m.kind)) out << m.to_bus;
        out << ',' << format_double(angle ? rad_to_deg_exact(m.value) : m.value) << ','
            << format_double(angle ? rad_to_deg_exact(m.sigma) : m.sigma) << '\n';
    }
}

std::vector<Measurement> read_measurements_csv(std::istream& in) {
    CsvReader csv(in, {"kind", "at_bus", "to_bus", "value", "sigma"});
    std::vector<Measurement> out;
    while (auto row = csv.next()) {
        Measurement m;
        m.kind = measurement_kind_from_string((*row)[0]);
        m.at_bus = csv.integer(*row, 1);
        if (is_flow(m.kind)) {
            m.to_bus = csv.integer(*row, 2);
        } else if (!(*row)[2].empty()) {
            throw InputError(csv.where() + ": to_bus given for a non-flow measurement");
        }
        m.value = csv.number(*row, 3);
        m.sigma = csv.number(*row, 4);
        if (m.kind == MeasurementKind::v_angle) {
            m.value = deg_to_rad(m.value);
            m.sigma = deg_to_rad(m.sigma);
        }
        out.push_back(m);
    }
    return out;
}

}  // namespace gridse
