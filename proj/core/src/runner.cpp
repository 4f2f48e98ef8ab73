#include "gridse/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>
#include <ostream>
#include <queue>
#include <random>

#include "gridse/error.hpp"
#include "gridse/parallel.hpp"
#include "gridse/text.hpp"

namespace gridse {

bool GlobalReport::converged() const {
    return std::all_of(areas.begin(), areas.end(), [](const EstimationReport& r) { return r.converged; });
}

GlobalReport run_all(std::span<const AreaNetwork> areas, std::span<const MeasurementSet> sets, const RunConfig& cfg) {
    ThreadPool pool(cfg.worker_count);
    return run_all(areas, sets, cfg, pool);
}

GlobalReport run_all(std::span<const AreaNetwork> areas, std::span<const MeasurementSet> sets, const RunConfig& cfg,
                     ThreadPool& pool) {
    if (areas.size() != sets.size()) throw InputError("need exactly one measurement set per area");
    if (cfg.worker_count < 1) throw InputError("worker_count must be at least 1");

    GlobalReport global;
    global.worker_count = pool.size();
    global.areas.resize(areas.size());
    std::vector<std::exception_ptr> errors(areas.size());

    const auto start = std::chrono::steady_clock::now();
    for_each_chunk(&pool, areas.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t a = begin; a < end; ++a) {
            try {
                global.areas[a] = estimate(areas[a], sets[a], cfg.solver, &pool);
            } catch (...) {
                errors[a] = std::current_exception();
            }
        }
    });
    global.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

    for (std::size_t a = 0; a < areas.size(); ++a) {
        if (!errors[a]) continue;
        try {
            std::rethrow_exception(errors[a]);
        } catch (const InputError& e) {
            throw InputError("area " + std::to_string(areas[a].area_id) + ": " + e.what());
        } catch (const std::exception& e) {
            throw AreaFailure(areas[a].area_id, "area " + std::to_string(areas[a].area_id) + ": " + e.what());
        }
    }

    for (const EstimationReport& r : global.areas) global.times += r.times;
    for (const AreaNetwork& area : areas) global.frame_offsets.push_back(area.reference_angle);
    global.merged = merge_states(global.areas, areas);
    global.max_cross_check_residual = cross_check_residual(areas, global.merged);
    return global;
}

std::vector<BusState> merge_states(std::span<const EstimationReport> reports, std::span<const AreaNetwork> areas) {
    if (reports.size() != areas.size()) throw InputError("missing area report");
    std::vector<BusState> merged;
    for (std::size_t a = 0; a < areas.size(); ++a) {
        const AreaNetwork& area = areas[a];
        const EstimationReport& report = reports[a];
        if (report.area_id != area.area_id || report.bus_ids.size() != area.graph.bus_count() ||
            report.state.size() != area.graph.bus_count()) {
            throw InputError("report for area " + std::to_string(area.area_id) + " is missing or does not match");
        }
        const double offset = area.reference_angle - report.state.angle[area.graph.slack_index()];
        for (std::size_t i = 0; i < report.bus_ids.size(); ++i) {
            merged.push_back({report.bus_ids[i], report.state.vmag[i], report.state.angle[i] + offset});
        }
    }
    std::sort(merged.begin(), merged.end(), [](const BusState& x, const BusState& y) { return x.bus < y.bus; });
    return merged;
}

double cross_check_residual(std::span<const AreaNetwork> areas, std::span<const BusState> merged) {
    auto find = [&](int bus) -> const BusState& {
        const auto it = std::lower_bound(merged.begin(), merged.end(), bus,
                                         [](const BusState& s, int id) { return s.bus < id; });
        if (it == merged.end() || it->bus != bus) throw InputError("merged state lacks bus " + std::to_string(bus));
        return *it;
    };
    double worst = 0.0;
    for (const AreaNetwork& area : areas) {
        for (const RemovedBranch& rb : area.removed_branches) {
            const BusState& local = find(rb.local_bus);
            const BusState& remote = find(rb.remote.bus);
            const Complex flow = equivalent_injection(rb.branch, {local.bus, local.vmag, local.angle},
                                                      {remote.bus, remote.vmag, remote.angle});
            worst = std::max(worst, std::abs(flow - rb.injection));
        }
    }
    return worst;
}

namespace {

double percentile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const auto idx = static_cast<std::size_t>(std::lround(q * static_cast<double>(v.size() - 1)));
    return v[idx];
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string iteration_summary(const GlobalReport& r) {
    std::string out;
    for (const EstimationReport& a : r.areas) out += (out.empty() ? "" : "/") + std::to_string(a.iterations);
    return out;
}

}  // namespace

std::vector<BenchmarkRow> scaling_benchmark(const BenchmarkInput& input, const BenchmarkOptions& options) {
    if (input.graph == nullptr || input.measurements == nullptr) throw InputError("benchmark needs a network and measurements");
    if (options.repeats < 1) throw InputError("benchmark needs at least one repeat");

    const PartitionResult parts = apply_partition(*input.graph, input.partition, input.pmus);
    std::vector<MeasurementSet> part_sets;
    for (const AreaNetwork& area : parts.areas) {
        part_sets.push_back(area_measurements(area, *input.measurements, input.pmu_weighting));
    }
    const std::vector<AreaNetwork> whole{whole_network(*input.graph)};
    const std::vector<MeasurementSet> whole_sets{area_measurements(whole.front(), *input.measurements)};

    std::vector<BenchmarkRow> rows;
    for (const std::size_t workers : options.worker_counts) {
        if (workers < 1) throw InputError("worker counts must be at least 1");
        ThreadPool pool(workers);
        RunConfig cfg;
        cfg.worker_count = workers;
        cfg.solver = options.solver;
        auto time_mode = [&](const char* mode, std::span<const AreaNetwork> areas, std::span<const MeasurementSet> sets) {
            for (int w = 0; w < options.warmup; ++w) run_all(areas, sets, cfg, pool);
            std::vector<double> samples, assembly, factorization, iteration;
            GlobalReport last;
            for (int r = 0; r < options.repeats; ++r) {
                last = run_all(areas, sets, cfg, pool);
                samples.push_back(last.wall_ms);
                assembly.push_back(last.times.assembly_ms);
                factorization.push_back(last.times.factorization_ms);
                iteration.push_back(last.times.iteration_ms);
            }
            rows.push_back({workers, mode, median(samples), percentile(samples, 0.1), percentile(samples, 0.9),
                            iteration_summary(last), {median(assembly), median(factorization), median(iteration)}});
        };
        time_mode("monolithic", whole, whole_sets);
        time_mode("partitioned", parts.areas, part_sets);
    }
    return rows;
}

void write_benchmark_csv(std::span<const BenchmarkRow> rows, std::ostream& out) {
    out << "workers,mode,median_ms,p10_ms,p90_ms,iterations\n";
    for (const BenchmarkRow& r : rows) {
        out << r.workers << ',' << r.mode << ',' << format_double(r.median_ms) << ',' << format_double(r.p10_ms)
            << ',' << format_double(r.p90_ms) << ',' << r.iterations << '\n';
    }
}

SyntheticGrid make_synthetic_grid(const NetworkGraph& base, std::size_t bus_count, int area_count,
                                  std::uint64_t seed) {
    const std::size_t nb = base.bus_count();
    if (nb < 2) throw InputError("synthetic grid base needs at least two buses");
    if (area_count < 1) throw InputError("synthetic grid needs at least one area");
    const std::size_t copies = (bus_count + nb - 1) / nb;
    if (bus_count == 0 || copies < static_cast<std::size_t>(area_count)) {
        throw InputError("synthetic grid of " + std::to_string(bus_count) + " buses is too small for " +
                         std::to_string(area_count) + " areas");
    }
    const StateVector base_truth = truth_state(base);

    // Breadth-first order from the slack; every prefix is connected.
    std::vector<std::size_t> bfs{base.slack_index()};
    std::vector<char> seen(nb, 0);
    seen[base.slack_index()] = 1;
    for (std::size_t head = 0; head < bfs.size(); ++head) {
        for (const std::size_t j : base.neighbours(bfs[head])) {
            if (!seen[j]) {
                seen[j] = 1;
                bfs.push_back(j);
            }
        }
    }
    if (bfs.size() != nb) throw InputError("synthetic grid base is not connected");
    const std::size_t tie_out = bfs.back();

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> scale(0.95, 1.05);
    std::uniform_real_distribution<double> vjitter(-0.005, 0.005);

    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::map<int, int> assignment;
    const double slack_angle = base_truth.angle[base.slack_index()];
    double offset = slack_angle;
    int next_id = 1;
    int global_slack = 0;
    int previous_tie = 0;
    double previous_tie_angle = 0.0;

    for (std::size_t c = 0; c < copies; ++c) {
        const std::size_t size = c + 1 < copies ? nb : bus_count - nb * (copies - 1);
        std::vector<char> keep(nb, 0);
        for (std::size_t k = 0; k < size; ++k) keep[bfs[k]] = 1;
        const int area = static_cast<int>(c * static_cast<std::size_t>(area_count) / copies);

        std::vector<int> id_of(nb, 0);
        for (std::size_t i = 0; i < nb; ++i) {
            if (!keep[i]) continue;
            Bus b = base.buses()[i];
            b.id = next_id++;
            id_of[i] = b.id;
            if (i == base.slack_index() && c == 0) {
                global_slack = b.id;
            } else if (b.kind == BusKind::slack) {
                b.kind = BusKind::generator;
            }
            b.true_angle = base_truth.angle[i] - slack_angle + offset;
            b.true_vmag = base_truth.vmag[i] * (1.0 + vjitter(rng));
            assignment[b.id] = area;
            buses.push_back(b);
        }
        for (const Branch& br : base.branches()) {
            const std::size_t f = base.index_of(br.from_bus);
            const std::size_t t = base.index_of(br.to_bus);
            if (!keep[f] || !keep[t]) continue;
            Branch copy = br;
            const double s = scale(rng);
            copy.from_bus = id_of[f];
            copy.to_bus = id_of[t];
            copy.r *= s;
            copy.x *= s;
            copy.b_charging /= s;
            branches.push_back(copy);
        }
        if (c > 0) {
            branches.push_back({previous_tie, id_of[base.slack_index()], 0.002, 0.02, 0.0, 1.0, 0.0, true});
        }
        if (c + 1 < copies) {
            previous_tie = id_of[tie_out];
            previous_tie_angle = base_truth.angle[tie_out] - slack_angle + offset;
            // The next copy's slack sits slightly behind this tie end.
            offset = previous_tie_angle - 0.02;
        }
    }
    SyntheticGrid grid{NetworkGraph(std::move(buses), std::move(branches), global_slack, base.base_mva()),
                       PartitionSpec::from_assignment(std::move(assignment))};
    return grid;
}

}  // namespace gridse
