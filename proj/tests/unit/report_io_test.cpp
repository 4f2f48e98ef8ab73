#include <gtest/gtest.h>

#include <sstream>

#include "gridse/error.hpp"
#include "gridse/report_io.hpp"
#include "support.hpp"

namespace gridse {
namespace {

TEST(ReportIo, GlobalReportRoundTrips) {
    const NetworkGraph g = test::load_case("case14");
    const MeasurementSet set = test::exact_measurements(g);
    const std::vector<AreaNetwork> areas{whole_network(g)};
    const std::vector<MeasurementSet> sets{area_measurements(areas.front(), set)};
    const GlobalReport report = run_all(areas, sets, RunConfig{});
    std::stringstream text;
    write_report_json(report, text);
    const ReportSummary back = read_report_json(text);
    EXPECT_EQ(back.converged, report.converged());
    ASSERT_EQ(back.states.size(), report.merged.size());
    for (std::size_t i = 0; i < back.states.size(); ++i) {
        EXPECT_EQ(back.states[i].bus, report.merged[i].bus);
        EXPECT_EQ(back.states[i].vmag, report.merged[i].vmag);
        EXPECT_NEAR(back.states[i].angle, report.merged[i].angle, 1e-15);
    }
}

TEST(ReportIo, MalformedJsonIsAnInputError) {
    std::istringstream broken("{\"converged\": true, \"states\": [");
    EXPECT_THROW(read_report_json(broken), InputError);
    std::istringstream missing("{\"converged\": true}");
    EXPECT_THROW(read_report_json(missing), InputError);
}

TEST(ReportIo, StateErrorNeedsEveryBus) {
    const NetworkGraph g = test::load_case("case14");
    const StateVector truth = truth_state(g);
    std::vector<BusState> states;
    for (std::size_t i = 0; i < g.bus_count(); ++i) states.push_back({g.buses()[i].id, truth.vmag[i], truth.angle[i]});
    const StateError zero = state_error(g, states);
    EXPECT_EQ(zero.angle_mse_deg2, 0.0);
    EXPECT_EQ(zero.vmag_mse_pu2, 0.0);
    states[3].vmag += 0.01;
    EXPECT_NEAR(state_error(g, states).vmag_mse_pu2, 1e-4 / 14.0, 1e-18);
    states.pop_back();
    EXPECT_THROW(state_error(g, states), InputError);
}

}  // namespace
}  // namespace gridse
