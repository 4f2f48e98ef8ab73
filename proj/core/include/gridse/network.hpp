#pragma once

#include <complex>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace gridse {

class ThreadPool;

using Complex = std::complex<double>;

enum class BusKind { slack, generator, load };

const char* to_string(BusKind kind);
BusKind bus_kind_from_string(const std::string& text);

/// A network node. All electrical quantities are per-unit on the system base.
struct Bus {
    int id = 0;
    BusKind kind = BusKind::load;
    double shunt_g = 0.0;
    double shunt_b = 0.0;
    // Solved operating point carried by the case file, when present.
    std::optional<double> true_vmag;
    std::optional<double> true_angle;  // radians
    // Scheduled net injection and voltage set-point, used only by the
    // reference power flow.
    double p_sched = 0.0;
    double q_sched = 0.0;
    double v_set = 1.0;

    friend bool operator==(const Bus&, const Bus&) = default;
};

/// Pi-model branch with an off-nominal tap on the from side.
struct Branch {
    int from_bus = 0;
    int to_bus = 0;
    double r = 0.0;
    double x = 0.0;
    double b_charging = 0.0;  // total line charging, split half per end
    double tap_ratio = 1.0;
    double phase_shift = 0.0;  // radians
    bool in_service = true;

    friend bool operator==(const Branch&, const Branch&) = default;
};

/// Two-port admittance of one branch:
///   [I_from]   [ff ft] [V_from]
///   [I_to  ] = [tf tt] [V_to  ]
struct BranchAdmittance {
    Complex ff;
    Complex ft;
    Complex tf;
    Complex tt;
};

/// Throws DegenerateBranchError when x == 0.
BranchAdmittance branch_admittance(const Branch& branch);

/// Immutable bus/branch graph. Buses keep the order they were given in;
/// "bus index" below always means the position in buses().
class NetworkGraph {
  public:
    NetworkGraph() = default;

    /// Validates ids, endpoints, tap ratios and the slack designation.
    /// Throws InputError on duplicate ids, dangling endpoints, self loops,
    /// non-positive taps or a missing slack bus.
    NetworkGraph(std::vector<Bus> buses, std::vector<Branch> branches, int slack_bus,
                 double base_mva = 100.0);

    const std::vector<Bus>& buses() const noexcept { return buses_; }
    const std::vector<Branch>& branches() const noexcept { return branches_; }
    std::size_t bus_count() const noexcept { return buses_.size(); }
    int slack_bus() const noexcept { return slack_bus_; }
    std::size_t slack_index() const noexcept { return slack_index_; }
    double base_mva() const noexcept { return base_mva_; }

    /// In-service branches incident to the bus at `bus_index`, ascending.
    std::span<const std::size_t> incident(std::size_t bus_index) const {
        return {adjacency_[bus_index]};
    }

    bool contains(int bus_id) const { return index_.contains(bus_id); }
    /// Throws InputError for unknown ids.
    std::size_t index_of(int bus_id) const;
    const Bus& bus(int bus_id) const { return buses_[index_of(bus_id)]; }

    /// Distinct neighbour indices of a bus (parallel branches collapse).
    std::vector<std::size_t> neighbours(std::size_t bus_index) const;

    /// In-service branches joining the two buses, ascending branch index.
    std::vector<std::size_t> branches_between(int a, int b) const;

    bool is_connected() const;
    bool has_truth() const;

    friend bool operator==(const NetworkGraph& a, const NetworkGraph& b) {
        return a.buses_ == b.buses_ && a.branches_ == b.branches_ &&
               a.slack_bus_ == b.slack_bus_ && a.base_mva_ == b.base_mva_;
    }

  private:
    std::vector<Bus> buses_;
    std::vector<Branch> branches_;
    std::vector<std::vector<std::size_t>> adjacency_;
    std::unordered_map<int, std::size_t> index_;
    int slack_bus_ = 0;
    std::size_t slack_index_ = 0;
    double base_mva_ = 100.0;
};

/// Nodal admittance matrix in graph form. Off-diagonal entries are keyed by
/// ordered bus-id pairs; parallel branches are summed.
struct NodalAdmittance {
    std::vector<int> bus_ids;
    std::vector<Complex> diagonal;  // by bus index
    std::map<std::pair<int, int>, Complex> off_diagonal;

    /// Y(i, j); zero when no branch joins the pair.
    Complex at(int from_id, int to_id) const;
};

/// Diagonal entry of one bus, from the bus and its incident branches only.
Complex diagonal_admittance(const NetworkGraph& graph, std::size_t bus_index);

/// Per-bus map over the graph; `pool` may be null.
NodalAdmittance build_admittance(const NetworkGraph& graph, ThreadPool* pool = nullptr);

enum class CaseFormat { native_json, matpower_text };

/// Picks the format from the file extension (.json, otherwise text).
CaseFormat case_format_for(const std::string& path);

NetworkGraph import_case(const std::string& path, CaseFormat format);
NetworkGraph read_case_json(std::istream& in);
/// Reads the plain-text table format (MATPOWER case layout):
///   mpc.baseMVA = <value>;
///   mpc.bus    rows: bus_i type Pd Qd Gs Bs area Vm Va ...
///   mpc.gen    rows: bus Pg Qg Qmax Qmin Vg mBase status ...
///   mpc.branch rows: fbus tbus r x b rateA rateB rateC ratio angle status ...
/// type 3 marks the slack, 2 a generator bus, 1 a load bus; ratio 0 means 1.
NetworkGraph read_case_matpower(std::istream& in);

void write_case_json(const NetworkGraph& graph, std::ostream& out);
void export_case(const NetworkGraph& graph, const std::string& path);

}  // namespace gridse
