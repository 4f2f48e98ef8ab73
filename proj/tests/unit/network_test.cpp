#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "gridse/error.hpp"
#include "gridse/network.hpp"
#include "gridse/parallel.hpp"
#include "gridse/power_equations.hpp"
#include "oracle.hpp"
#include "support.hpp"

namespace gridse {
namespace {

using test::load_case;
using test::two_bus;

TEST(Admittance, TwoBusLosslessLine) {
    const NetworkGraph g = two_bus(0.0, 0.1);
    const NodalAdmittance y = build_admittance(g);
    // -(j0.1)^-1 = +j10
    EXPECT_NEAR(y.at(1, 2).real(), 0.0, 1e-15);
    EXPECT_NEAR(y.at(1, 2).imag(), 10.0, 1e-12);
    EXPECT_NEAR(y.at(1, 1).imag(), -10.0, 1e-12);

    // Injected power from the admittance matrix equals the branch-flow formula.
    StateVector x = StateVector::flat(2);
    x.angle[1] = -0.1;
    const Eigen::VectorXcd s = oracle::bus_injections(g, x);
    const EndFlow flow = end_flow(end_admittance(g.branches()[0], branch_admittance(g.branches()[0]), 1), 1.0, 1.0, 0.1);
    EXPECT_NEAR(s[0].real(), flow.p, 1e-12);
    EXPECT_NEAR(s[0].imag(), flow.q, 1e-12);
    EXPECT_NEAR(flow.p, std::sin(0.1) / 0.1, 1e-12);
}

TEST(Admittance, ShuntOnlyBus) {
    std::vector<Bus> buses(1);
    buses[0].id = 7;
    buses[0].kind = BusKind::slack;
    buses[0].shunt_b = 0.05;
    const NetworkGraph g(buses, {}, 7);
    const NodalAdmittance y = build_admittance(g);
    EXPECT_EQ(y.at(7, 7), Complex(0.0, 0.05));
}

TEST(Admittance, ParallelLinesAdd) {
    const NetworkGraph single = two_bus(0.01, 0.1, 0.02);
    std::vector<Branch> doubled = single.branches();
    doubled.push_back(doubled.front());
    const NetworkGraph twin(single.buses(), doubled, 1);
    const Complex one = build_admittance(single).at(1, 1);
    const Complex two = build_admittance(twin).at(1, 1);
    EXPECT_NEAR(std::abs(two - 2.0 * one), 0.0, 1e-12);
}

TEST(Admittance, ZeroReactanceIsDegenerate) {
    const NetworkGraph g = two_bus(0.01, 0.0);
    EXPECT_THROW(build_admittance(g), DegenerateBranchError);
}

TEST(Admittance, MatchesDenseOracleAndIsSymmetricWithoutTaps) {
    for (const char* name : {"case14", "case118"}) {
        const NetworkGraph g = load_case(name);
        const NodalAdmittance y = build_admittance(g);
        const Eigen::MatrixXcd dense = oracle::admittance_matrix(g);
        for (std::size_t i = 0; i < g.bus_count(); ++i) {
            for (std::size_t j = 0; j < g.bus_count(); ++j) {
                const Complex got = y.at(g.buses()[i].id, g.buses()[j].id);
                const Complex want = dense(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                ASSERT_NEAR(std::abs(got - want), 0.0, 1e-9 * (1.0 + std::abs(want))) << name << " " << i << "," << j;
            }
        }
        for (const Branch& br : g.branches()) {
            if (br.tap_ratio == 1.0 && br.phase_shift == 0.0) {
                EXPECT_EQ(y.at(br.from_bus, br.to_bus), y.at(br.to_bus, br.from_bus));
            }
        }
    }
}

TEST(Admittance, NodeLocalDiagonalAndPoolIndependence) {
    const NetworkGraph g = load_case("case118");
    ThreadPool pool(4);
    const NodalAdmittance serial = build_admittance(g);
    const NodalAdmittance parallel = build_admittance(g, &pool);
    EXPECT_EQ(serial.diagonal, parallel.diagonal);
    EXPECT_EQ(serial.off_diagonal, parallel.off_diagonal);
    for (std::size_t i = 0; i < g.bus_count(); ++i) EXPECT_EQ(diagonal_admittance(g, i), serial.diagonal[i]);
    // Off-diagonal entries exist exactly for connected pairs.
    for (const auto& [pair, value] : serial.off_diagonal) {
        EXPECT_FALSE(g.branches_between(pair.first, pair.second).empty());
    }
}

TEST(ImportCase, Ieee118) {
    const NetworkGraph g = load_case("case118");
    EXPECT_EQ(g.bus_count(), 118u);
    EXPECT_EQ(g.branches().size(), 186u);
    EXPECT_EQ(g.slack_bus(), 69);
    EXPECT_TRUE(g.has_truth());
    EXPECT_TRUE(g.is_connected());
}

TEST(ImportCase, Ieee14HasBranch4To5) {
    const NetworkGraph g = load_case("case14");
    EXPECT_EQ(g.bus_count(), 14u);
    EXPECT_EQ(g.branches().size(), 20u);
    EXPECT_EQ(g.branches_between(4, 5).size(), 1u);
    EXPECT_EQ(g.slack_bus(), 1);
    // Tap transformer 4-7 in the standard case.
    const Branch& t = g.branches()[g.branches_between(4, 7).front()];
    EXPECT_DOUBLE_EQ(t.tap_ratio, 0.978);
}

TEST(ImportCase, EmptyFileIsAnError) {
    std::istringstream empty_text;
    EXPECT_THROW(read_case_matpower(empty_text), InputError);
    std::istringstream empty_json;
    EXPECT_THROW(read_case_json(empty_json), InputError);
}

TEST(ImportCase, RejectsMissingSlackDanglingAndDuplicates) {
    const std::string head = R"({"base_mva": 100, "slack": 1, "buses": [)";
    auto parse = [](const std::string& text) {
        std::istringstream in(text);
        return read_case_json(in);
    };
    const std::string bus1 = R"({"id": 1, "kind": "slack", "shunt_g": 0, "shunt_b": 0})";
    const std::string bus2 = R"({"id": 2, "kind": "load", "shunt_g": 0, "shunt_b": 0})";
    const std::string line = R"({"from": 1, "to": 2, "r": 0, "x": 0.1, "b": 0, "tap": 1, "shift_deg": 0, "status": 1})";
    const std::string dangling = R"({"from": 1, "to": 3, "r": 0, "x": 0.1, "b": 0, "tap": 1, "shift_deg": 0, "status": 1})";

    EXPECT_NO_THROW(parse(head + bus1 + "," + bus2 + R"(], "branches": [)" + line + "]}"));
    EXPECT_THROW(parse(head + bus1 + "," + bus1 + R"(], "branches": []})"), InputError);
    EXPECT_THROW(parse(head + bus1 + "," + bus2 + R"(], "branches": [)" + dangling + "]}"), InputError);
    EXPECT_THROW(parse(R"({"base_mva": 100, "slack": 5, "buses": [)" + bus1 + "," + bus2 + R"(], "branches": [)" +
                       line + "]}"),
                 InputError);
}

TEST(ImportCase, JsonRoundTripIsExact) {
    for (const char* name : {"case14", "case118"}) {
        const NetworkGraph g = load_case(name);
        std::stringstream first;
        write_case_json(g, first);
        const NetworkGraph again = read_case_json(first);
        EXPECT_EQ(again, g) << name;
        std::stringstream second;
        write_case_json(again, second);
        EXPECT_EQ(first.str(), second.str());
    }
}

TEST(ImportCase, ExportAndImportThroughFiles) {
    const NetworkGraph g = load_case("case14");
    const auto path = std::filesystem::temp_directory_path() / "gridse_case14_roundtrip.json";
    export_case(g, path.string());
    EXPECT_EQ(import_case(path.string(), case_format_for(path.string())), g);
    std::filesystem::remove(path);
}

TEST(ImportCase, DisconnectedCaseIsRejected) {
    const std::string text = R"(mpc.baseMVA = 100;
mpc.bus = [
	1	3	0	0	0	0	1	1	0	135	1	1.1	0.9;
	2	1	0	0	0	0	1	1	0	135	1	1.1	0.9;
	3	1	0	0	0	0	1	1	0	135	1	1.1	0.9;
];
mpc.gen = [
	1	0	0	10	-10	1	100	1	10	0;
];
mpc.branch = [
	1	2	0	0.1	0	0	0	0	0	0	1	-360	360;
];
)";
    const auto path = std::filesystem::temp_directory_path() / "gridse_disconnected.m";
    {
        std::ofstream out(path);
        out << text;
    }
    EXPECT_THROW(import_case(path.string(), CaseFormat::matpower_text), InputError);
    std::filesystem::remove(path);
}

}  // namespace
}  // namespace gridse
