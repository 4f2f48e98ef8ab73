#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "gridse/network.hpp"

namespace gridse {

/// Enumerator order is the within-bus sort order of a MeasurementSet.
enum class MeasurementKind { p_injection, q_injection, p_flow, q_flow, v_magnitude, v_angle };

const char* to_string(MeasurementKind kind);
MeasurementKind measurement_kind_from_string(const std::string& text);

/// True for P injections, P flows and angles: the rows paired with the
/// angle states.
constexpr bool is_active(MeasurementKind kind) {
    return kind == MeasurementKind::p_injection || kind == MeasurementKind::p_flow ||
           kind == MeasurementKind::v_angle;
}
constexpr bool is_flow(MeasurementKind kind) {
    return kind == MeasurementKind::p_flow || kind == MeasurementKind::q_flow;
}

/// A flow measurement is taken at `at_bus` looking towards `to_bus`; with
/// parallel branches it measures their combined flow.
struct Measurement {
    MeasurementKind kind = MeasurementKind::p_injection;
    int at_bus = 0;
    int to_bus = 0;       // flows only
    double value = 0.0;   // per-unit; radians for angles
    double sigma = 0.01;  // same units as value

    double weight() const { return 1.0 / (sigma * sigma); }

    friend bool operator==(const Measurement&, const Measurement&) = default;
};

enum class Half { active, reactive };

/// Contiguous slice of one half that belongs to a single bus.
struct BusGroup {
    int bus = 0;
    std::size_t begin = 0;
    std::size_t end = 0;
};

/// Measurements split into the active and reactive halves, each ordered by
/// (bus id, kind, to_bus) so that every bus owns one contiguous group.
class MeasurementSet {
  public:
    MeasurementSet() = default;

    const std::vector<Measurement>& active() const noexcept { return active_; }
    const std::vector<Measurement>& reactive() const noexcept { return reactive_; }
    const std::vector<Measurement>& half(Half h) const noexcept {
        return h == Half::active ? active_ : reactive_;
    }
    const std::vector<BusGroup>& groups(Half h) const noexcept {
        return h == Half::active ? active_groups_ : reactive_groups_;
    }
    std::size_t m_total() const noexcept { return active_.size() + reactive_.size(); }

    /// Inverse variances, aligned with half(h).
    std::vector<double> weights(Half h) const;
    std::vector<Measurement> all() const;

    friend bool operator==(const MeasurementSet& a, const MeasurementSet& b) {
        return a.active_ == b.active_ && a.reactive_ == b.reactive_;
    }

  private:
    friend MeasurementSet group_by_bus(const NetworkGraph& graph, std::vector<Measurement> raw);

    std::vector<Measurement> active_;
    std::vector<Measurement> reactive_;
    std::vector<BusGroup> active_groups_;
    std::vector<BusGroup> reactive_groups_;
};

/// Orders and splits raw measurements. Throws InputError for unknown buses,
/// flows without an in-service branch, or non-positive sigmas.
MeasurementSet group_by_bus(const NetworkGraph& graph, std::vector<Measurement> raw);

/// Per-kind standard deviations.
struct Sigmas {
    double power = 0.01;
    double vmag = 0.004;
    double angle = 1e-4;

    double for_kind(MeasurementKind kind) const;
};

struct CoveragePlan {
    bool injections = true;
    bool flows_from_end = true;
    bool flows_to_end = false;
    bool vmag = true;
};

/// Bus states indexed like graph.buses().
struct StateVector {
    std::vector<double> angle;  // radians
    std::vector<double> vmag;   // per-unit

    static StateVector flat(std::size_t n) { return {std::vector<double>(n, 0.0), std::vector<double>(n, 1.0)}; }
    std::size_t size() const noexcept { return angle.size(); }

    friend bool operator==(const StateVector&, const StateVector&) = default;
};

/// State stored in the graph's true_vmag/true_angle fields. Throws
/// InputError if any bus lacks them.
StateVector truth_state(const NetworkGraph& graph);

/// Measurements of `truth` under `plan`. Noise is N(0, noise.for_kind(k));
/// a zero noise sigma gives exact values weighted with `weights`.
struct SynthesisOptions {
    CoveragePlan plan;
    Sigmas noise{0.0, 0.0, 0.0};
    Sigmas weights;
    std::uint64_t seed = 0;
};
MeasurementSet synthesize(const NetworkGraph& graph, const StateVector& truth,
                          const SynthesisOptions& options);

/// CSV with header `kind,at_bus,to_bus,value,sigma`; angles in degrees.
void write_measurements_csv(const MeasurementSet& set, std::ostream& out);
std::vector<Measurement> read_measurements_csv(std::istream& in);

}  // namespace gridse
