#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "cli.hpp"
#include "gridse/report_io.hpp"
#include "gridse/units.hpp"
#include "oracle.hpp"
#include "support.hpp"

namespace gridse {
namespace {

namespace fs = std::filesystem;

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "gridse");
    std::vector<const char*> argv;
    for (const std::string& a : args) argv.push_back(a.c_str());
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class CliTest : public ::testing::Test {
  protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("gridse_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }
    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    fs::path dir_;
};

const std::string case14 = test::data_path("case14.m");
const std::string case118 = test::data_path("case118.m");
const std::string part14 = test::data_path("case14_partition.csv");
const std::string part118 = test::data_path("case118_partition.csv");

TEST_F(CliTest, MonolithicEstimateConverges) {
    ASSERT_EQ(run_cli({"gen-meas", "--case", case118, "--out", path("m.csv")}).code, 0);
    const Outcome est = run_cli({"estimate", "--case", case118, "--measurements", path("m.csv"), "--out", path("r.json")});
    ASSERT_EQ(est.code, 0) << est.err;
    EXPECT_NE(est.out.find("area 0: converged"), std::string::npos) << est.out;
    std::ifstream in(path("r.json"));
    const ReportSummary report = read_report_json(in);
    EXPECT_TRUE(report.converged);
    EXPECT_EQ(report.states.size(), 118u);

    const Outcome verify = run_cli({"verify", "--case", case118, "--report", path("r.json")});
    ASSERT_EQ(verify.code, 0) << verify.err;
    const NetworkGraph g = test::load_case("case118");
    const StateError e = state_error(g, report.states);
    EXPECT_LE(e.angle_mse_deg2, 1e-6);
    EXPECT_LE(e.vmag_mse_pu2, 1e-10);
    EXPECT_NE(verify.out.find("angle MSE (deg^2): "), std::string::npos);
    EXPECT_NE(verify.out.find("vmag MSE (pu^2): "), std::string::npos);
}

TEST_F(CliTest, PartitionedEstimateConverges) {
    ASSERT_EQ(run_cli({"gen-meas", "--case", case118, "--partition", part118, "--out", path("m.csv"), "--pmu-out",
                       path("pmu.csv")})
                  .code,
              0);
    const Outcome est = run_cli({"estimate", "--case", case118, "--measurements", path("m.csv"), "--partition", part118,
                                 "--pmu", path("pmu.csv"), "--workers", "2"});
    ASSERT_EQ(est.code, 0) << est.err;
    EXPECT_NE(est.out.find("cross-check residual"), std::string::npos);
}

TEST_F(CliTest, MissingPmuNamesTheBus) {
    ASSERT_EQ(run_cli({"gen-meas", "--case", case14, "--partition", part14, "--out", path("m.csv"), "--pmu-out",
                       path("pmu.csv")})
                  .code,
              0);
    std::ifstream in(path("pmu.csv"));
    std::ofstream trimmed(path("pmu_trimmed.csv"));
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("5,", 0) != 0) trimmed << line << '\n';
    }
    trimmed.close();
    const Outcome est = run_cli({"estimate", "--case", case14, "--measurements", path("m.csv"), "--partition", part14,
                                 "--pmu", path("pmu_trimmed.csv")});
    EXPECT_EQ(est.code, cli::kExitInput);
    EXPECT_NE(est.err.find("bus 5"), std::string::npos) << est.err;
}

TEST_F(CliTest, UnobservableAreaExitsNumerical) {
    ASSERT_EQ(run_cli({"gen-meas", "--case", case14, "--partition", part14, "--out", path("m.csv"), "--pmu-out",
                       path("pmu.csv")})
                  .code,
              0);
    // Drop every measurement taken inside area 2.
    const PartitionSpec spec = test::load_partition("case14");
    const NetworkGraph g = test::load_case("case14");
    std::ifstream in(path("m.csv"));
    std::vector<Measurement> kept;
    for (const Measurement& m : read_measurements_csv(in)) {
        if (spec.assignment.at(m.at_bus) != 2) kept.push_back(m);
    }
    std::ofstream out(path("withheld.csv"));
    write_measurements_csv(group_by_bus(g, kept), out);
    out.close();
    const Outcome est = run_cli({"estimate", "--case", case14, "--measurements", path("withheld.csv"), "--partition",
                                 part14, "--pmu", path("pmu.csv")});
    EXPECT_EQ(est.code, cli::kExitNumerical);
    EXPECT_NE(est.err.find("area 2"), std::string::npos) << est.err;
    EXPECT_NE(est.err.find("zero pivot"), std::string::npos) << est.err;
}

GlobalReport truth_report(const NetworkGraph& g, double angle_offset) {
    GlobalReport r;
    const StateVector truth = truth_state(g);
    for (std::size_t i = 0; i < g.bus_count(); ++i) {
        r.merged.push_back({g.buses()[i].id, truth.vmag[i], truth.angle[i] + angle_offset});
    }
    return r;
}

double mse_line(const std::string& text, const std::string& label) {
    const auto at = text.find(label);
    EXPECT_NE(at, std::string::npos) << text;
    return std::stod(text.substr(at + label.size()));
}

TEST_F(CliTest, VerifyReportsTableUnits) {
    const NetworkGraph g = test::load_case("case14");
    {
        std::ofstream out(path("exact.json"));
        write_report_json(truth_report(g, 0.0), out);
    }
    const Outcome exact = run_cli({"verify", "--case", case14, "--report", path("exact.json")});
    ASSERT_EQ(exact.code, 0) << exact.err;
    EXPECT_EQ(mse_line(exact.out, "angle MSE (deg^2): "), 0.0);
    EXPECT_EQ(mse_line(exact.out, "vmag MSE (pu^2): "), 0.0);

    {
        std::ofstream out(path("shifted.json"));
        write_report_json(truth_report(g, deg_to_rad(0.001)), out);
    }
    const Outcome shifted = run_cli({"verify", "--case", case14, "--report", path("shifted.json")});
    ASSERT_EQ(shifted.code, 0) << shifted.err;
    EXPECT_NEAR(mse_line(shifted.out, "angle MSE (deg^2): "), 1e-6, 1e-15);
    EXPECT_EQ(mse_line(shifted.out, "vmag MSE (pu^2): "), 0.0);
}

TEST_F(CliTest, VerifyNeedsTruth) {
    const NetworkGraph g = test::load_case("case14");
    std::vector<Bus> buses = g.buses();
    for (Bus& b : buses) {
        b.true_vmag.reset();
        b.true_angle.reset();
    }
    export_case(NetworkGraph(buses, g.branches(), g.slack_bus()), path("bare.json"));
    {
        std::ofstream out(path("r.json"));
        write_report_json(truth_report(g, 0.0), out);
    }
    EXPECT_EQ(run_cli({"verify", "--case", path("bare.json"), "--report", path("r.json")}).code, cli::kExitInput);
}

TEST_F(CliTest, GenMeasRoundTripsExactValues) {
    ASSERT_EQ(run_cli({"gen-meas", "--case", case14, "--out", path("m.csv")}).code, 0);
    const NetworkGraph g = test::load_case("case14");
    std::ifstream in(path("m.csv"));
    const MeasurementSet set = group_by_bus(g, read_measurements_csv(in));
    const Eigen::VectorXd h = oracle::measurement_values(g, set, truth_state(g));
    std::size_t row = 0;
    for (const auto* rows : {&set.active(), &set.reactive()}) {
        for (const Measurement& m : *rows) EXPECT_NEAR(m.value, h(static_cast<Eigen::Index>(row++)), 1e-12);
    }
    EXPECT_EQ(row, set.m_total());
}

TEST_F(CliTest, GenMeasIsReproducibleForASeed) {
    const std::vector<std::string> noisy{"--noise-power", "0.01", "--noise-vmag", "0.004", "--partition", part14,
                                         "--pmu-noise-angle", "0.01"};
    auto gen = [&](const std::string& tag, const std::string& seed) {
        std::vector<std::string> args{"gen-meas", "--case", case14, "--out", path(tag + ".csv"),
                                      "--pmu-out", path(tag + "_pmu.csv"), "--seed", seed};
        args.insert(args.end(), noisy.begin(), noisy.end());
        return run_cli(args).code;
    };
    ASSERT_EQ(gen("a", "42"), 0);
    ASSERT_EQ(gen("b", "42"), 0);
    ASSERT_EQ(gen("c", "43"), 0);
    EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
    EXPECT_EQ(slurp(path("a_pmu.csv")), slurp(path("b_pmu.csv")));
    EXPECT_NE(slurp(path("a.csv")), slurp(path("c.csv")));
}

TEST_F(CliTest, GenMeasWritesEveryBoundaryPmu) {
    ASSERT_EQ(run_cli({"gen-meas", "--case", case14, "--partition", part14, "--out", path("m.csv"), "--pmu-out",
                       path("pmu.csv")})
                  .code,
              0);
    std::ifstream in(path("pmu.csv"));
    std::set<int> buses;
    for (const auto& [bus, record] : read_pmu_csv(in)) buses.insert(bus);
    const NetworkGraph g = test::load_case("case14");
    const PartitionSpec spec = test::load_partition("case14");
    std::set<int> ends;
    for (const Branch& br : g.branches()) {
        if (spec.assignment.at(br.from_bus) != spec.assignment.at(br.to_bus)) {
            ends.insert(br.from_bus);
            ends.insert(br.to_bus);
        }
    }
    EXPECT_EQ(buses, ends);
    EXPECT_TRUE(buses.contains(4));
    EXPECT_TRUE(buses.contains(5));
}

std::vector<std::string> csv_rows(const std::string& text) {
    std::istringstream in(text);
    std::vector<std::string> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) rows.push_back(line);
    }
    return rows;
}

TEST_F(CliTest, BenchmarkTableLayout) {
    const Outcome big = run_cli({"benchmark", "--case", case118, "--synthetic-size", "10790", "--areas", "4",
                                 "--workers", "1,2,4,8", "--repeats", "1"});
    ASSERT_EQ(big.code, 0) << big.err;
    const std::vector<std::string> rows = csv_rows(big.out);
    ASSERT_EQ(rows.size(), 9u);
    EXPECT_EQ(rows.front(), "workers,mode,median_ms,p10_ms,p90_ms,iterations");

    const Outcome small = run_cli({"benchmark", "--case", case14, "--partition", part14, "--workers", "1"});
    ASSERT_EQ(small.code, 0) << small.err;
    const std::vector<std::string> small_rows = csv_rows(small.out);
    ASSERT_EQ(small_rows.size(), 3u);
    EXPECT_EQ(small_rows[1].rfind("1,monolithic,", 0), 0u);
    EXPECT_EQ(small_rows[2].rfind("1,partitioned,", 0), 0u);
}

TEST_F(CliTest, BenchmarkIterationsRepeatForASeed) {
    auto iterations = [&] {
        const Outcome r = run_cli({"benchmark", "--case", case118, "--partition", part118, "--workers", "1,2",
                                   "--repeats", "1", "--seed", "5"});
        EXPECT_EQ(r.code, 0) << r.err;
        std::vector<std::string> its;
        for (const std::string& row : csv_rows(r.out)) its.push_back(row.substr(row.rfind(',') + 1));
        return its;
    };
    EXPECT_EQ(iterations(), iterations());
}

TEST_F(CliTest, BadFlagsAreInputErrors) {
    EXPECT_EQ(run_cli({"benchmark", "--case", case14, "--workers", "one"}).code, cli::kExitInput);
    EXPECT_EQ(run_cli({"benchmark", "--case", case14, "--workers", "0", "--partition", part14}).code, cli::kExitInput);
    EXPECT_EQ(run_cli({"benchmark", "--case", case14, "--bogus"}).code, cli::kExitInput);
    EXPECT_EQ(run_cli({"estimate", "--case", case14}).code, cli::kExitInput);
    EXPECT_EQ(run_cli({"import", "--case", path("missing.m")}).code, cli::kExitInput);
    EXPECT_EQ(run_cli({}).code, cli::kExitInput);
    EXPECT_EQ(run_cli({"--help"}).code, cli::kExitOk);
}

TEST_F(CliTest, ImportWritesNativeJson) {
    const Outcome r = run_cli({"import", "--case", case118, "--out", path("case118.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("buses: 118"), std::string::npos);
    EXPECT_EQ(import_case(path("case118.json"), CaseFormat::native_json), test::load_case("case118"));
    const Outcome p = run_cli({"partition", "--case", case14, "--partition", part14});
    ASSERT_EQ(p.code, 0) << p.err;
    EXPECT_NE(p.out.find("inter-area branches: 7"), std::string::npos) << p.out;
}

}  // namespace
}  // namespace gridse
