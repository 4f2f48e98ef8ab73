#pragma once

#include <iosfwd>
#include <map>
#include <span>
#include <vector>

#include "gridse/measurement.hpp"
#include "gridse/network.hpp"

namespace gridse {

/// Bus -> area assignment. Areas are numbered 0..area_count-1.
struct PartitionSpec {
    std::map<int, int> assignment;
    int area_count = 0;

    /// Every bus in the graph appears once, ids are dense, no area is empty.
    void validate(const NetworkGraph& graph) const;

    static PartitionSpec single_area(const NetworkGraph& graph);
    /// Derives area_count from the assignment.
    static PartitionSpec from_assignment(std::map<int, int> assignment);
};

/// Voltage phasor recorded at a bus. Zero sigmas mean "use the default".
struct PmuRecord {
    int bus = 0;
    double vmag = 1.0;
    double angle = 0.0;  // radians, global frame
    double sigma_vmag = 0.0;
    double sigma_angle = 0.0;

    friend bool operator==(const PmuRecord&, const PmuRecord&) = default;
};

using PmuMap = std::map<int, PmuRecord>;

/// An inter-area branch seen from its terminal inside this area.
struct RemovedBranch {
    Branch branch;
    int local_bus = 0;
    PmuRecord remote;
    Complex injection;  // power leaving local_bus into the branch
};

/// One isolated area. Its graph's slack bus is the local slack, whose angle
/// is pinned at `reference_angle` in the global frame; estimates for the
/// area are produced in a frame where the local slack sits at zero.
struct AreaNetwork {
    int area_id = 0;
    NetworkGraph graph;
    std::vector<PmuRecord> reference_buses;
    std::vector<RemovedBranch> removed_branches;
    std::map<int, Complex> equivalent_injections;
    int local_slack = 0;
    double reference_angle = 0.0;
};

struct BoundaryReport {
    std::size_t inter_area_branch_count = 0;
    std::size_t boundary_bus_count = 0;
    double impacted_ratio = 0.0;
};

struct PartitionResult {
    std::vector<AreaNetwork> areas;
    BoundaryReport report;
};

/// Complex power flowing from the local terminal into `branch`, evaluated
/// with the pi-model at the two recorded phasors.
Complex equivalent_injection(const Branch& branch, const PmuRecord& local, const PmuRecord& remote);

/// Cuts inter-area branches and builds one AreaNetwork per area. The local
/// slack is the global slack when the area holds it, otherwise the lowest
/// reference bus id. Throws InputError for a boundary bus without a PMU, an
/// empty area or an area that is not connected once the ties are cut.
PartitionResult apply_partition(const NetworkGraph& graph, const PartitionSpec& spec, const PmuMap& pmus);

/// The whole network as a single area.
AreaNetwork whole_network(const NetworkGraph& graph);

BoundaryReport boundary_report(std::span<const AreaNetwork> areas, std::size_t total_buses);

/// Endpoints of branches whose terminals lie in different areas, ascending.
std::vector<int> boundary_buses(const NetworkGraph& graph, const PartitionSpec& spec);

struct PmuWeighting {
    double sigma_vmag = 1e-4;   // per-unit
    double sigma_angle = 1e-4;  // radians
};

/// Restricts a global measurement set to one area: drops rows of other
/// areas and flows on cut branches, subtracts equivalent injections from
/// boundary injection rows, shifts angle rows into the area frame, and adds
/// a magnitude row per reference bus plus an angle row per reference bus
/// other than the local slack.
MeasurementSet area_measurements(const AreaNetwork& area, const MeasurementSet& global,
                                 const PmuWeighting& weighting = {});

/// Phasors of `state` at the given buses, with the given channel sigmas.
PmuMap record_pmus(const NetworkGraph& graph, const StateVector& state, std::span<const int> buses,
                   double sigma_vmag = 0.0, double sigma_angle = 0.0);

/// `bus_id,area_id`
PartitionSpec read_partition_csv(std::istream& in);
void write_partition_csv(const PartitionSpec& spec, std::ostream& out);
/// `bus_id,vmag_pu,angle_deg,sigma_vmag,sigma_angle_deg`
PmuMap read_pmu_csv(std::istream& in);
void write_pmu_csv(const PmuMap& pmus, std::ostream& out);

}  // namespace gridse
