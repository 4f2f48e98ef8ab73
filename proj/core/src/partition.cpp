#include "gridse/partition.hpp"

#include <algorithm>
#include <ostream>
#include <set>

#include "gridse/error.hpp"
#include "gridse/power_equations.hpp"
#include "gridse/text.hpp"
#include "gridse/units.hpp"

namespace gridse {

void PartitionSpec::validate(const NetworkGraph& graph) const {
    if (area_count <= 0) throw InputError("partition has no areas");
    std::vector<std::size_t> sizes(static_cast<std::size_t>(area_count), 0);
    for (const auto& [bus, area] : assignment) {
        if (!graph.contains(bus)) throw InputError("partition names unknown bus " + std::to_string(bus));
        if (area < 0 || area >= area_count) {
            throw InputError("bus " + std::to_string(bus) + " has area id " + std::to_string(area) +
                             " outside 0.." + std::to_string(area_count - 1));
        }
        ++sizes[static_cast<std::size_t>(area)];
    }
    for (const Bus& b : graph.buses()) {
        if (!assignment.contains(b.id)) throw InputError("bus " + std::to_string(b.id) + " has no area");
    }
    for (int a = 0; a < area_count; ++a) {
        if (sizes[static_cast<std::size_t>(a)] == 0) throw InputError("area " + std::to_string(a) + " is empty");
    }
}

PartitionSpec PartitionSpec::single_area(const NetworkGraph& graph) {
    PartitionSpec spec;
    spec.area_count = 1;
    for (const Bus& b : graph.buses()) spec.assignment[b.id] = 0;
    return spec;
}

PartitionSpec PartitionSpec::from_assignment(std::map<int, int> assignment) {
    PartitionSpec spec;
    for (const auto& [bus, area] : assignment) spec.area_count = std::max(spec.area_count, area + 1);
    spec.assignment = std::move(assignment);
    return spec;
}

Complex equivalent_injection(const Branch& branch, const PmuRecord& local, const PmuRecord& remote) {
    if (local.bus != branch.from_bus && local.bus != branch.to_bus) {
        throw InputError("bus " + std::to_string(local.bus) + " is not a terminal of branch " +
                         std::to_string(branch.from_bus) + "-" + std::to_string(branch.to_bus));
    }
    const EndAdmittance y = end_admittance(branch, branch_admittance(branch), local.bus);
    const EndFlow f = end_flow(y, local.vmag, remote.vmag, local.angle - remote.angle);
    return {f.p, f.q};
}

std::vector<int> boundary_buses(const NetworkGraph& graph, const PartitionSpec& spec) {
    std::set<int> ends;
    for (const Branch& br : graph.branches()) {
        if (br.in_service && spec.assignment.at(br.from_bus) != spec.assignment.at(br.to_bus)) {
            ends.insert(br.from_bus);
            ends.insert(br.to_bus);
        }
    }
    return {ends.begin(), ends.end()};
}

PartitionResult apply_partition(const NetworkGraph& graph, const PartitionSpec& spec, const PmuMap& pmus) {
    spec.validate(graph);
    auto area_of = [&](int bus) { return spec.assignment.at(bus); };

    for (const int bus : boundary_buses(graph, spec)) {
        if (!pmus.contains(bus)) throw InputError("boundary bus " + std::to_string(bus) + " has no PMU record");
    }

    PartitionResult result;
    for (int a = 0; a < spec.area_count; ++a) {
        AreaNetwork area;
        area.area_id = a;

        std::vector<Bus> buses;
        std::set<int> references;
        for (const Bus& b : graph.buses()) {
            if (area_of(b.id) == a) buses.push_back(b);
        }
        std::vector<Branch> branches;
        for (const Branch& br : graph.branches()) {
            const int af = area_of(br.from_bus);
            const int at = area_of(br.to_bus);
            if (af == a && at == a) {
                branches.push_back(br);
                continue;
            }
            if (!br.in_service || (af != a && at != a)) continue;
            const int local = af == a ? br.from_bus : br.to_bus;
            const int remote = af == a ? br.to_bus : br.from_bus;
            RemovedBranch removed;
            removed.branch = br;
            removed.local_bus = local;
            removed.remote = pmus.at(remote);
            removed.injection = equivalent_injection(br, pmus.at(local), removed.remote);
            area.equivalent_injections[local] += removed.injection;
            area.removed_branches.push_back(removed);
            references.insert(local);
        }
        for (const int bus : references) area.reference_buses.push_back(pmus.at(bus));

        if (area_of(graph.slack_bus()) == a) {
            area.local_slack = graph.slack_bus();
        } else if (!references.empty()) {
            area.local_slack = *references.begin();
        } else {
            throw InputError("area " + std::to_string(a) + " has neither the slack bus nor a reference bus");
        }
        for (Bus& b : buses) {
            if (b.id == area.local_slack) {
                b.kind = BusKind::slack;
            } else if (b.kind == BusKind::slack) {
                b.kind = BusKind::generator;
            }
        }
        if (const auto pmu = pmus.find(area.local_slack); pmu != pmus.end() && references.contains(area.local_slack)) {
            area.reference_angle = pmu->second.angle;
        } else {
            area.reference_angle = graph.bus(area.local_slack).true_angle.value_or(0.0);
        }

        area.graph = NetworkGraph(std::move(buses), std::move(branches), area.local_slack, graph.base_mva());
        if (!area.graph.is_connected()) {
            throw InputError("area " + std::to_string(a) + " is not connected after cutting inter-area branches");
        }
        result.areas.push_back(std::move(area));
    }
    result.report = boundary_report(result.areas, graph.bus_count());
    return result;
}

AreaNetwork whole_network(const NetworkGraph& graph) {
    return std::move(apply_partition(graph, PartitionSpec::single_area(graph), {}).areas.front());
}

BoundaryReport boundary_report(std::span<const AreaNetwork> areas, std::size_t total_buses) {
    std::set<int> buses;
    std::size_t removed = 0;
    for (const AreaNetwork& area : areas) {
        for (const PmuRecord& r : area.reference_buses) buses.insert(r.bus);
        removed += area.removed_branches.size();
    }
    BoundaryReport report;
    report.inter_area_branch_count = removed / 2;
    report.boundary_bus_count = buses.size();
    report.impacted_ratio = total_buses == 0 ? 0.0 : static_cast<double>(buses.size()) / static_cast<double>(total_buses);
    return report;
}

MeasurementSet area_measurements(const AreaNetwork& area, const MeasurementSet& global,
                                 const PmuWeighting& weighting) {
    const NetworkGraph& g = area.graph;
    std::vector<Measurement> rows;
    for (Measurement m : global.all()) {
        if (!g.contains(m.at_bus)) continue;
        if (is_flow(m.kind) && !g.contains(m.to_bus)) continue;
        if (m.kind == MeasurementKind::p_injection || m.kind == MeasurementKind::q_injection) {
            if (const auto it = area.equivalent_injections.find(m.at_bus); it != area.equivalent_injections.end()) {
                m.value -= m.kind == MeasurementKind::p_injection ? it->second.real() : it->second.imag();
            }
        }
        if (m.kind == MeasurementKind::v_angle) m.value -= area.reference_angle;
        rows.push_back(m);
    }
    for (const PmuRecord& pmu : area.reference_buses) {
        rows.push_back({MeasurementKind::v_magnitude, pmu.bus, 0, pmu.vmag,
                        pmu.sigma_vmag > 0.0 ? pmu.sigma_vmag : weighting.sigma_vmag});
        if (pmu.bus == area.local_slack) continue;
        rows.push_back({MeasurementKind::v_angle, pmu.bus, 0, pmu.angle - area.reference_angle,
                        pmu.sigma_angle > 0.0 ? pmu.sigma_angle : weighting.sigma_angle});
    }
    return group_by_bus(g, std::move(rows));
}

PmuMap record_pmus(const NetworkGraph& graph, const StateVector& state, std::span<const int> buses,
                   double sigma_vmag, double sigma_angle) {
    PmuMap out;
    for (const int bus : buses) {
        const std::size_t i = graph.index_of(bus);
        out[bus] = PmuRecord{bus, state.vmag[i], state.angle[i], sigma_vmag, sigma_angle};
    }
    return out;
}

PartitionSpec read_partition_csv(std::istream& in) {
    CsvReader csv(in, {"bus_id", "area_id"});
    std::map<int, int> assignment;
    while (auto row = csv.next()) {
        const int bus = csv.integer(*row, 0);
        if (!assignment.emplace(bus, csv.integer(*row, 1)).second) {
            throw InputError(csv.where() + ": bus " + std::to_string(bus) + " assigned twice");
        }
    }
    return PartitionSpec::from_assignment(std::move(assignment));
}

void write_partition_csv(const PartitionSpec& spec, std::ostream& out) {
    out << "bus_id,area_id\n";
    for (const auto& [bus, area] : spec.assignment) out << bus << ',' << area << '\n';
}

PmuMap read_pmu_csv(std::istream& in) {
    CsvReader csv(in, {"bus_id", "vmag_pu", "angle_deg", "sigma_vmag", "sigma_angle_deg"});
    PmuMap out;
    while (auto row = csv.next()) {
        PmuRecord r;
        r.bus = csv.integer(*row, 0);
        r.vmag = csv.number(*row, 1);
        r.angle = deg_to_rad(csv.number(*row, 2));
        r.sigma_vmag = csv.number(*row, 3);
        r.sigma_angle = deg_to_rad(csv.number(*row, 4));
        if (!(r.vmag > 0.0)) throw InputError(csv.where() + ": PMU magnitude must be positive");
        if (r.sigma_vmag < 0.0 || r.sigma_angle < 0.0) throw InputError(csv.where() + ": negative PMU sigma");
        if (!out.emplace(r.bus, r).second) throw InputError(csv.where() + ": duplicate PMU bus");
    }
    return out;
}

void write_pmu_csv(const PmuMap& pmus, std::ostream& out) {
    out << "bus_id,vmag_pu,angle_deg,sigma_vmag,sigma_angle_deg\n";
    for (const auto& [bus, r] : pmus) {
        out << bus << ',' << format_double(r.vmag) << ',' << format_double(rad_to_deg_exact(r.angle)) << ','
            << format_double(r.sigma_vmag) << ',' << format_double(rad_to_deg_exact(r.sigma_angle)) << '\n';
    }
}

}  // namespace gridse
