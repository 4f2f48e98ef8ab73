#pragma once

#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "gridse/network.hpp"
#include "gridse/partition.hpp"
#include "gridse/measurement.hpp"
#include "gridse/estimator.hpp"

namespace gridse::test {

inline std::string data_path(const std::string& name) { return std::string(GRIDSE_DATA_DIR) + "/" + name; }
inline std::string test_data_path(const std::string& name) { return std::string(GRIDSE_TEST_DATA_DIR) + "/" + name; }

inline NetworkGraph load_case(const std::string& name) {
    return import_case(data_path(name + ".m"), CaseFormat::matpower_text);
}

inline PartitionSpec load_partition(const std::string& name) {
    std::ifstream in(data_path(name + "_partition.csv"));
    return read_partition_csv(in);
}

/// Injections and magnitudes at every bus, flows at every from-end.
inline MeasurementSet exact_measurements(const NetworkGraph& g) {
    return synthesize(g, truth_state(g), SynthesisOptions{});
}

inline SolverOptions tight_options(double eps = 1e-10, int max_iterations = 500) {
    SolverOptions o;
    o.eps_theta = eps;
    o.eps_v = eps;
    o.max_iterations = max_iterations;
    return o;
}

/// Two buses joined by one line; bus 1 is the slack.
inline NetworkGraph two_bus(double r, double x, double b = 0.0) {
    std::vector<Bus> buses(2);
    buses[0].id = 1;
    buses[0].kind = BusKind::slack;
    buses[1].id = 2;
    std::vector<Branch> branches{{1, 2, r, x, b, 1.0, 0.0, true}};
    return NetworkGraph(buses, branches, 1);
}

/// Angles shifted so the slack sits at zero, as an estimator reports them.
inline StateVector slack_frame(const NetworkGraph& g, StateVector x) {
    const double ref = x.angle[g.slack_index()];
    for (double& a : x.angle) a -= ref;
    return x;
}

inline StateVector random_state(std::size_t n, std::mt19937_64& rng, double spread = 0.1) {
    std::uniform_real_distribution<double> u(-spread, spread);
    StateVector x = StateVector::flat(n);
    for (std::size_t i = 0; i < n; ++i) {
        x.angle[i] = u(rng);
        x.vmag[i] = 1.0 + 0.5 * u(rng);
    }
    return x;
}

}  // namespace gridse::test
