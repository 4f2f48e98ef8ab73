#include "cli.hpp"

#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "gridse/error.hpp"
#include "gridse/report_io.hpp"
#include "gridse/runner.hpp"
#include "gridse/text.hpp"
#include "gridse/units.hpp"
#include "oracle.hpp"

namespace gridse::cli {

namespace {

struct Options {
    std::string case_path;
    std::string format;
    std::string partition_path;
    std::string pmu_path;
    std::string measurement_path;
    std::string report_path;
    std::string out_path;
    std::string pmu_out_path;
    double eps_theta = 1e-4;
    double eps_v = 1e-4;
    int max_iterations = 50;
    std::size_t workers = 1;
    std::vector<std::size_t> worker_list{1};
    std::uint64_t seed = 0;
    // Noise standard deviations; zero means exact values.
    double noise_power = 0.0;
    double noise_vmag = 0.0;
    double noise_angle_deg = 0.0;
    double pmu_noise_vmag = 0.0;
    double pmu_noise_angle_deg = 0.0;
    // Weights used for exact values.
    double sigma_power = Sigmas{}.power;
    double sigma_vmag = Sigmas{}.vmag;
    double sigma_angle_deg = rad_to_deg(Sigmas{}.angle);
    double pmu_sigma_vmag = PmuWeighting{}.sigma_vmag;
    double pmu_sigma_angle_deg = rad_to_deg(PmuWeighting{}.sigma_angle);
    bool no_injections = false;
    bool no_flows = false;
    bool both_flow_ends = false;
    bool no_vmag = false;
    std::string truth = "auto";
    std::size_t synthetic_size = 0;
    int areas = 4;
    int repeats = 5;
};

std::ofstream open_output(const std::string& path) {
    std::ofstream file(path);
    if (!file) throw InputError("cannot write '" + path + "'");
    return file;
}

std::ifstream open_input(const std::string& path, const char* what) {
    std::ifstream file(path);
    if (!file) throw InputError(std::string("cannot open ") + what + " '" + path + "'");
    return file;
}

NetworkGraph load_case(const Options& o) {
    CaseFormat format = case_format_for(o.case_path);
    if (o.format == "json" || o.format == "native-json") {
        format = CaseFormat::native_json;
    } else if (o.format == "matpower" || o.format == "matpower-like-text") {
        format = CaseFormat::matpower_text;
    } else if (!o.format.empty()) {
        throw InputError("unknown case format '" + o.format + "'");
    }
    return import_case(o.case_path, format);
}

PartitionSpec load_partition(const Options& o, const NetworkGraph& graph) {
    if (o.partition_path.empty()) return PartitionSpec::single_area(graph);
    auto in = open_input(o.partition_path, "partition file");
    return read_partition_csv(in);
}

PmuWeighting pmu_weighting(const Options& o) { return {o.pmu_sigma_vmag, deg_to_rad(o.pmu_sigma_angle_deg)}; }

SolverOptions solver_options(const Options& o) {
    SolverOptions s;
    s.eps_theta = o.eps_theta;
    s.eps_v = o.eps_v;
    s.max_iterations = o.max_iterations;
    s.validate();
    return s;
}

StateVector truth_for(const Options& o, const NetworkGraph& graph) {
    if (o.truth == "case" || (o.truth == "auto" && graph.has_truth())) return truth_state(graph);
    if (o.truth == "powerflow" || o.truth == "auto") return oracle::newton_powerflow(graph);
    throw InputError("--truth must be auto, case or powerflow");
}

int cmd_import(const Options& o, std::ostream& out) {
    const NetworkGraph graph = load_case(o);
    if (!o.out_path.empty()) {
        auto file = open_output(o.out_path);
        write_case_json(graph, file);
    }
    out << "buses: " << graph.bus_count() << "\nbranches: " << graph.branches().size()
        << "\nslack: " << graph.slack_bus() << "\ntrue state: " << (graph.has_truth() ? "yes" : "no") << '\n';
    return kExitOk;
}

int cmd_partition(const Options& o, std::ostream& out) {
    const NetworkGraph graph = load_case(o);
    const PartitionSpec spec = load_partition(o, graph);
    spec.validate(graph);
    const std::vector<int> boundary = boundary_buses(graph, spec);
    // Placeholder phasors: only the topology matters for the report.
    PmuMap pmus;
    for (const int bus : boundary) pmus[bus] = PmuRecord{bus, 1.0, 0.0, 0.0, 0.0};
    const PartitionResult result = apply_partition(graph, spec, pmus);
    out << "areas: " << spec.area_count << "\ninter-area branches: " << result.report.inter_area_branch_count
        << "\nboundary buses: " << result.report.boundary_bus_count << " (";
    for (std::size_t i = 0; i < boundary.size(); ++i) out << (i ? " " : "") << boundary[i];
    out << ")\nimpacted ratio: " << format_double(result.report.impacted_ratio) << '\n';
    for (const AreaNetwork& area : result.areas) {
        out << "area " << area.area_id << ": " << area.graph.bus_count() << " buses, local slack " << area.local_slack
            << '\n';
    }
    return kExitOk;
}

int cmd_gen_meas(const Options& o, std::ostream& out) {
    const NetworkGraph graph = load_case(o);
    const StateVector truth = truth_for(o, graph);
    SynthesisOptions syn;
    syn.plan.injections = !o.no_injections;
    syn.plan.flows_from_end = !o.no_flows;
    syn.plan.flows_to_end = !o.no_flows && o.both_flow_ends;
    syn.plan.vmag = !o.no_vmag;
    syn.noise = {o.noise_power, o.noise_vmag, deg_to_rad(o.noise_angle_deg)};
    syn.weights = {o.sigma_power, o.sigma_vmag, deg_to_rad(o.sigma_angle_deg)};
    syn.seed = o.seed;
    const MeasurementSet set = synthesize(graph, truth, syn);
    {
        auto file = open_output(o.out_path);
        write_measurements_csv(set, file);
    }
    out << "measurements: " << set.m_total() << " (" << set.active().size() << " active, " << set.reactive().size()
        << " reactive)\n";

    if (!o.pmu_out_path.empty()) {
        const PartitionSpec spec = load_partition(o, graph);
        spec.validate(graph);
        const std::vector<int> buses = boundary_buses(graph, spec);
        const double pmu_angle_noise = deg_to_rad(o.pmu_noise_angle_deg);
        PmuMap pmus = record_pmus(graph, truth, buses, o.pmu_noise_vmag, pmu_angle_noise);
        std::mt19937_64 rng(o.seed ^ 0x9e3779b97f4a7c15ULL);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (auto& [bus, pmu] : pmus) {
            if (o.pmu_noise_vmag > 0.0) pmu.vmag += o.pmu_noise_vmag * normal(rng);
            if (pmu_angle_noise > 0.0) pmu.angle += pmu_angle_noise * normal(rng);
        }
        auto file = open_output(o.pmu_out_path);
        write_pmu_csv(pmus, file);
        out << "PMU buses: " << pmus.size() << '\n';
    }
    return kExitOk;
}

int cmd_estimate(const Options& o, std::ostream& out) {
    const NetworkGraph graph = load_case(o);
    MeasurementSet global;
    {
        auto in = open_input(o.measurement_path, "measurement file");
        global = group_by_bus(graph, read_measurements_csv(in));
    }
    const PartitionSpec spec = load_partition(o, graph);
    PmuMap pmus;
    if (!o.pmu_path.empty()) {
        auto in = open_input(o.pmu_path, "PMU file");
        pmus = read_pmu_csv(in);
    }
    const PartitionResult parts = apply_partition(graph, spec, pmus);
    std::vector<MeasurementSet> sets;
    for (const AreaNetwork& area : parts.areas) sets.push_back(area_measurements(area, global, pmu_weighting(o)));

    RunConfig cfg;
    cfg.worker_count = o.workers;
    cfg.solver = solver_options(o);
    cfg.seed = o.seed;
    const GlobalReport report = run_all(parts.areas, sets, cfg);
    if (!o.out_path.empty()) {
        auto file = open_output(o.out_path);
        write_report_json(report, file);
    }
    for (const EstimationReport& r : report.areas) {
        out << "area " << r.area_id << ": " << (r.converged ? "converged" : "NOT converged") << " in " << r.iterations
            << " iterations, objective " << format_double(r.objective) << '\n';
    }
    out << "cross-check residual: " << format_double(report.max_cross_check_residual) << '\n';
    return report.converged() ? kExitOk : kExitNumerical;
}

int cmd_verify(const Options& o, std::ostream& out) {
    const NetworkGraph graph = load_case(o);
    if (!graph.has_truth()) throw InputError("case '" + o.case_path + "' carries no true state");
    auto in = open_input(o.report_path, "report");
    const ReportSummary report = read_report_json(in);
    const StateError err = state_error(graph, report.states);
    out << "angle MSE (deg^2): " << format_double(err.angle_mse_deg2) << '\n'
        << "vmag MSE (pu^2): " << format_double(err.vmag_mse_pu2) << '\n';
    return kExitOk;
}

int cmd_benchmark(const Options& o, std::ostream& out) {
    NetworkGraph graph = load_case(o);
    PartitionSpec spec;
    if (o.synthetic_size > 0) {
        SyntheticGrid grid = make_synthetic_grid(graph, o.synthetic_size, o.areas, o.seed);
        graph = std::move(grid.graph);
        spec = std::move(grid.partition);
    } else {
        spec = load_partition(o, graph);
    }
    const StateVector truth = truth_for(o, graph);
    SynthesisOptions syn;
    syn.seed = o.seed;
    const MeasurementSet set = synthesize(graph, truth, syn);

    BenchmarkInput input;
    input.graph = &graph;
    input.measurements = &set;
    input.partition = spec;
    input.pmus = record_pmus(graph, truth, boundary_buses(graph, spec));
    input.pmu_weighting = pmu_weighting(o);
    BenchmarkOptions bo;
    bo.worker_counts = o.worker_list;
    bo.repeats = o.repeats;
    bo.solver = solver_options(o);
    const std::vector<BenchmarkRow> rows = scaling_benchmark(input, bo);

    if (o.out_path.empty()) {
        write_benchmark_csv(rows, out);
    } else {
        auto file = open_output(o.out_path);
        write_benchmark_csv(rows, file);
        out << "buses: " << graph.bus_count() << ", areas: " << spec.area_count << '\n';
        for (const BenchmarkRow& r : rows) {
            out << r.workers << " workers, " << r.mode << ": " << format_double(r.median_ms) << " ms (assembly "
                << format_double(r.phases.assembly_ms) << ", factorization " << format_double(r.phases.factorization_ms)
                << ", iteration " << format_double(r.phases.iteration_ms) << ")\n";
        }
    }
    return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"Multi-area fast-decoupled power system state estimation", "gridse"};
    app.require_subcommand(1);

    auto add_case = [&](CLI::App* cmd) {
        cmd->add_option("--case", o.case_path, "Case file (.json native, otherwise MATPOWER text)")->required();
        cmd->add_option("--format", o.format, "Case format: json or matpower (default: by extension)");
    };
    auto add_solver = [&](CLI::App* cmd) {
        cmd->add_option("--eps-theta", o.eps_theta, "Angle step threshold, radians")->capture_default_str();
        cmd->add_option("--eps-v", o.eps_v, "Magnitude step threshold, per-unit")->capture_default_str();
        cmd->add_option("--max-iter", o.max_iterations, "Iteration limit")->capture_default_str();
        cmd->add_option("--pmu-sigma-vmag", o.pmu_sigma_vmag, "Default PMU magnitude sigma, per-unit");
        cmd->add_option("--pmu-sigma-angle", o.pmu_sigma_angle_deg, "Default PMU angle sigma, degrees");
    };

    CLI::App* import = app.add_subcommand("import", "Read a case and optionally write it as native JSON");
    add_case(import);
    import->add_option("--out", o.out_path, "Native JSON output");

    CLI::App* partition = app.add_subcommand("partition", "Report the boundary of a partition");
    add_case(partition);
    partition->add_option("--partition", o.partition_path, "bus_id,area_id CSV")->required();

    CLI::App* gen = app.add_subcommand("gen-meas", "Synthesize measurements and boundary PMU phasors");
    add_case(gen);
    gen->add_option("--out", o.out_path, "Measurement CSV output")->required();
    gen->add_option("--pmu-out", o.pmu_out_path, "PMU CSV output for the partition's boundary buses");
    gen->add_option("--partition", o.partition_path, "bus_id,area_id CSV");
    gen->add_option("--seed", o.seed, "Noise seed");
    gen->add_option("--truth", o.truth, "auto, case or powerflow")->capture_default_str();
    gen->add_option("--noise-power", o.noise_power, "Noise sigma of power measurements, per-unit");
    gen->add_option("--noise-vmag", o.noise_vmag, "Noise sigma of magnitude measurements, per-unit");
    gen->add_option("--noise-angle", o.noise_angle_deg, "Noise sigma of angle measurements, degrees");
    gen->add_option("--pmu-noise-vmag", o.pmu_noise_vmag, "Noise sigma of PMU magnitudes, per-unit");
    gen->add_option("--pmu-noise-angle", o.pmu_noise_angle_deg, "Noise sigma of PMU angles, degrees");
    gen->add_option("--sigma-power", o.sigma_power, "Weighting sigma of exact power values")->capture_default_str();
    gen->add_option("--sigma-vmag", o.sigma_vmag, "Weighting sigma of exact magnitudes")->capture_default_str();
    gen->add_option("--sigma-angle", o.sigma_angle_deg, "Weighting sigma of exact angles, degrees");
    gen->add_flag("--no-injections", o.no_injections, "Omit injection measurements");
    gen->add_flag("--no-flows", o.no_flows, "Omit flow measurements");
    gen->add_flag("--both-ends", o.both_flow_ends, "Measure flows at both branch ends");
    gen->add_flag("--no-vmag", o.no_vmag, "Omit magnitude measurements");

    CLI::App* estimate_cmd = app.add_subcommand("estimate", "Run state estimation, per area when partitioned");
    add_case(estimate_cmd);
    add_solver(estimate_cmd);
    estimate_cmd->add_option("--measurements", o.measurement_path, "Measurement CSV")->required();
    estimate_cmd->add_option("--partition", o.partition_path, "bus_id,area_id CSV");
    estimate_cmd->add_option("--pmu", o.pmu_path, "PMU CSV");
    estimate_cmd->add_option("--workers", o.workers, "Worker threads")->capture_default_str();
    estimate_cmd->add_option("--seed", o.seed, "Run seed");
    estimate_cmd->add_option("--out", o.out_path, "Report JSON output");

    CLI::App* verify = app.add_subcommand("verify", "Mean squared error of a report against the case's true state");
    add_case(verify);
    verify->add_option("--report", o.report_path, "Report JSON")->required();

    CLI::App* bench = app.add_subcommand("benchmark", "Time monolithic and partitioned estimation");
    add_case(bench);
    add_solver(bench);
    bench->add_option("--partition", o.partition_path, "bus_id,area_id CSV");
    bench->add_option("--workers", o.worker_list, "Worker counts")->delimiter(',');
    bench->add_option("--synthetic-size", o.synthetic_size, "Tile the case into a grid of this many buses");
    bench->add_option("--areas", o.areas, "Areas of the synthetic grid")->capture_default_str();
    bench->add_option("--repeats", o.repeats, "Timed runs per row")->capture_default_str();
    bench->add_option("--seed", o.seed, "Synthetic grid seed");
    bench->add_option("--truth", o.truth, "auto, case or powerflow");
    bench->add_option("--out", o.out_path, "CSV output (default: standard output)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    }

    try {
        if (*import) return cmd_import(o, out);
        if (*partition) return cmd_partition(o, out);
        if (*gen) return cmd_gen_meas(o, out);
        if (*estimate_cmd) return cmd_estimate(o, out);
        if (*verify) return cmd_verify(o, out);
        if (*bench) return cmd_benchmark(o, out);
    } catch (const InputError& e) {
        err << "input error: " << e.what() << '\n';
        return kExitInput;
    } catch (const UnobservableError& e) {
        err << "numerical error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << '\n';
        return kExitNumerical;
    }
    return kExitInput;
}

}  // namespace gridse::cli
