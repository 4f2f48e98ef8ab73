#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "gridse/error.hpp"
#include "gridse/estimator.hpp"
#include "gridse/partition.hpp"

namespace gridse {

struct RunConfig {
    std::size_t worker_count = 1;
    SolverOptions solver;
    std::uint64_t seed = 0;
};

/// One bus of a merged solution, global frame.
struct BusState {
    int bus = 0;
    double vmag = 1.0;
    double angle = 0.0;  // radians

    friend bool operator==(const BusState&, const BusState&) = default;
};

struct GlobalReport {
    std::vector<EstimationReport> areas;
    std::vector<double> frame_offsets;  // per area, radians
    std::vector<BusState> merged;       // ascending bus id
    PhaseTimes times;                   // summed over areas
    double wall_ms = 0.0;
    std::size_t worker_count = 1;
    /// Largest |S| mismatch between a cut branch's flow at the merged state
    /// and its recorded equivalent injection.
    double max_cross_check_residual = 0.0;

    bool converged() const;
};

/// Thrown when an area fails; the message names the area.
class AreaFailure : public NumericalError {
  public:
    AreaFailure(int area_id, const std::string& what) : NumericalError(what), area_id_(area_id) {}
    int area_id() const noexcept { return area_id_; }

  private:
    int area_id_;
};

/// Estimates every area on a pool of cfg.worker_count workers. Areas share
/// only immutable inputs; within an area, node-level work reuses the pool.
GlobalReport run_all(std::span<const AreaNetwork> areas, std::span<const MeasurementSet> sets, const RunConfig& cfg);
GlobalReport run_all(std::span<const AreaNetwork> areas, std::span<const MeasurementSet> sets, const RunConfig& cfg,
                     ThreadPool& pool);

/// Shifts each area so its local slack sits at the area's recorded angle
/// and concatenates the areas. Throws InputError if an area report is
/// missing or does not match its area.
std::vector<BusState> merge_states(std::span<const EstimationReport> reports, std::span<const AreaNetwork> areas);

/// Max |S_cut(merged) - recorded injection| over all removed branches.
double cross_check_residual(std::span<const AreaNetwork> areas, std::span<const BusState> merged);

struct BenchmarkRow {
    std::size_t workers = 1;
    std::string mode;  // "monolithic" or "partitioned"
    double median_ms = 0.0;
    double p10_ms = 0.0;
    double p90_ms = 0.0;
    std::string iterations;  // per area, '/'-separated
    PhaseTimes phases;       // medians over the timed runs, summed over areas
};

struct BenchmarkInput {
    const NetworkGraph* graph = nullptr;
    const MeasurementSet* measurements = nullptr;
    PartitionSpec partition;
    PmuMap pmus;
    PmuWeighting pmu_weighting;
};

struct BenchmarkOptions {
    std::vector<std::size_t> worker_counts{1};
    int repeats = 5;
    int warmup = 1;
    SolverOptions solver;
};

/// Times monolithic and partitioned estimation for each worker count and
/// reports the median, 10th and 90th percentile of `repeats` runs.
std::vector<BenchmarkRow> scaling_benchmark(const BenchmarkInput& input, const BenchmarkOptions& options);

/// `workers,mode,median_ms,p10_ms,p90_ms,iterations`
void write_benchmark_csv(std::span<const BenchmarkRow> rows, std::ostream& out);

/// Large test grid: tiled, perturbed copies of `base` chained by tie lines,
/// with exactly `bus_count` buses. The last copy may be a breadth-first
/// prefix of the base. Copies are split into `area_count` contiguous
/// groups, so the partition cuts `area_count - 1` ties with distinct
/// endpoints. The returned graph carries its own consistent true state.
struct SyntheticGrid {
    NetworkGraph graph;
    PartitionSpec partition;
};
SyntheticGrid make_synthetic_grid(const NetworkGraph& base, std::size_t bus_count, int area_count,
                                  std::uint64_t seed);

}  // namespace gridse
