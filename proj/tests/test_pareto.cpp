#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

#include "ecoroute/pareto.hpp"

using namespace ecoroute;

namespace {

// 8 km hill ending at a charger that has to add 5 % soc. Small enough to
// solve in about a second.
Scenario small_trip(double t_b0 = -10.0, double soc_f_min = 0.5) {
  return parse_scenario(
      "schema_version: 1\nroad:\n  breakpoints:\n    - [0, 0, 18.0, 30.5]\n"
      "    - [4000, 30, 18.0, 30.5]\n    - [8000, 0, 18.0, 30.5]\n"
      "chargers:\n  - s_m: 8000\n    p_grid_max_W: 150000\n    c_e_per_kWh: 5\n"
      "    t_chg_max_s: 3600\n"
      "costs:\n  c_t_trip_per_s: 0.02\nboundary:\n  v_0_mps: 24\n  soc_0: 0.45\n"
      "  soc_f_min: " + std::to_string(soc_f_min) + "\n  T_b0_C: " + std::to_string(t_b0) +
      "\n  T_amb_C: " + std::to_string(t_b0) + "\n");
}

PlanOptions small_options() {
  PlanOptions o;
  o.transcription.ds = 1000.0;
  o.transcription.n_tau = 8;
  return o;
}

// Trajectories and costs; diagnostics carry wall times.
bool same_trip(TripSolution a, TripSolution b) {
  a.diagnostics.wall_time_s = b.diagnostics.wall_time_s = 0.0;
  return a == b;
}

ParetoPoint point(double w, double trip, double cost, const std::string& status = "optimal") {
  ParetoPoint p;
  p.c_t_trip = w;
  p.trip_time = trip;
  p.energy_cost = cost;
  p.status = status;
  return p;
}

}  // namespace

TEST(Front, OrderReversalsCountsOptimalPointsOnly) {
  ParetoFront f;
  f.points = {point(0.001, 900, 10), point(0.002, 800, 11), point(0.005, 700, 12)};
  EXPECT_EQ(f.order_reversals(), 0);
  f.points.push_back(point(0.01, 650, 11.5));  // cheaper and faster: reversal
  EXPECT_EQ(f.order_reversals(), 1);
  f.points.back().status = "max_iter";
  EXPECT_EQ(f.order_reversals(), 0);
}

TEST(Front, CsvLayout) {
  ParetoFront f;
  f.points = {point(-0.001, 900, 10), point(0.002, 800, 11, "max_iter")};
  f.points[0].negative_weight = true;
  f.points[0].charging_time = 120.5;
  std::istringstream in(f.to_csv());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "c_t_trip,trip_time_s,chg_time_s,energy_cost,status");
  std::getline(in, line);
  EXPECT_EQ(line, "-0.001,900.000000,120.500000,10.000000,optimal_negative_weight");
  std::getline(in, line);
  EXPECT_EQ(line, "0.002,800.000000,0.000000,11.000000,max_iter");
  EXPECT_FALSE(std::getline(in, line));
}

TEST(Sweep, RejectsEmptyOrUnsortedWeights) {
  const auto scn = small_trip();
  EXPECT_THROW(sweep(scn, {}), std::invalid_argument);
  EXPECT_THROW(sweep(scn, {0.02, 0.01}), std::invalid_argument);
}

TEST(Sweep, SingleWeightMatchesDirectSolve) {
  auto scn = small_trip();
  SweepOptions opts;
  opts.plan = small_options();
  const auto front = sweep(scn, {0.015}, opts);
  scn.costs.c_t_trip = 0.015;
  const auto direct = plan_trip(scn, opts.plan);
  ASSERT_EQ(front.points.size(), 1u);
  EXPECT_TRUE(same_trip(front.points[0].solution, direct.solution));
  EXPECT_EQ(front.points[0].status, direct.nlp.status);
  EXPECT_EQ(front.points[0].trip_time, direct.solution.trip_time());
}

TEST(Sweep, FrontIsMonotoneAndParallelMatchesColdSolves) {
  const auto scn = small_trip();
  const std::vector<double> w{0.005, 0.01, 0.02, 0.04};
  SweepOptions opts;
  opts.plan = small_options();
  const auto warm = sweep(scn, w, opts);
  for (const auto& p : warm.points) EXPECT_TRUE(p.optimal()) << p.c_t_trip << " " << p.status;
  EXPECT_EQ(warm.order_reversals(), 0);
  for (std::size_t i = 1; i < w.size(); ++i) {
    EXPECT_LE(warm.points[i].trip_time, warm.points[i - 1].trip_time * (1 + 1e-6));
    EXPECT_GE(warm.points[i].energy_cost, warm.points[i - 1].energy_cost * (1 - 1e-6));
  }

  opts.warm_start = false;
  const auto cold = sweep(scn, w, opts);
  opts.parallel = 2;
  const auto par = sweep(scn, w, opts);
  for (std::size_t i = 0; i < w.size(); ++i) {
    EXPECT_TRUE(same_trip(par.points[i].solution, cold.points[i].solution));
    // Warm and cold runs land on the same optimum up to solver tolerance.
    EXPECT_NEAR(warm.points[i].solution.costs.total, cold.points[i].solution.costs.total,
                1e-4 * cold.points[i].solution.costs.total);
  }
}

TEST(Study, RequiresACharger) {
  auto scn = small_trip();
  scn.chargers.clear();
  scn.boundary.soc_f_min = 0.2;
  EXPECT_THROW(preconditioning_study(scn, 0.02, small_options()), std::invalid_argument);
}

TEST(Study, BatteryThermalSwitchOnlyTouchesBatteryCircuits) {
  const auto scn = small_trip();
  const auto off = without_battery_thermal(scn);
  EXPECT_FALSE(off.vehicle.battery_thermal);
  EXPECT_EQ(off.vehicle.hvch_battery_max_driving(), 0.0);
  EXPECT_EQ(off.vehicle.hvac_battery_max(), 0.0);
  EXPECT_EQ(off.vehicle.p_hvch_cabin, scn.vehicle.p_hvch_cabin);
}

TEST(Study, WarmPackMakesPreconditioningIrrelevant) {
  const auto rep = preconditioning_study(small_trip(30.0), 0.02, small_options());
  ASSERT_EQ(rep.with_btm.status, "optimal");
  ASSERT_EQ(rep.without_btm.status, "optimal");
  EXPECT_NEAR(rep.charging_time_ratio, 1.0, 0.02);
  const auto j = nlohmann::json::parse(rep.to_json());
  EXPECT_EQ(j["case1"]["status"], "optimal");
  EXPECT_NEAR(j["charging_time_ratio"].get<double>(), rep.charging_time_ratio, 1e-12);
}

TEST(Study, ColdPackChargesLongerWithoutPreconditioning) {
  const auto rep = preconditioning_study(small_trip(-10.0, 0.8), 0.02, small_options());
  ASSERT_EQ(rep.with_btm.status, "optimal");
  ASSERT_EQ(rep.without_btm.status, "optimal");
  EXPECT_GT(rep.without_btm.charging_time, rep.with_btm.charging_time);
  // Disabling an actuator can only raise the optimal cost.
  EXPECT_GE(rep.without_btm.total_cost, rep.with_btm.total_cost * (1 - 1e-6));
}

TEST(Sweep, MidRouteChargerSolvesWithAndWithoutBatteryHeating) {
  // Regression: these cold solves used to stall with the polish seeded by
  // penalty-amplified multipliers.
  const auto scn = load_scenario(ECOROUTE_TEST_DATA "/flat_one_charger.yaml");
  SweepOptions opts;
  opts.plan = small_options();
  opts.warm_start = false;
  const std::vector<double> w{0.005, 0.01, 0.02, 0.04};
  for (const auto& s : {scn, without_battery_thermal(scn)}) {
    const auto front = sweep(s, w, opts);
    for (const auto& p : front.points)
      EXPECT_TRUE(p.optimal()) << s.vehicle.battery_thermal << " " << p.c_t_trip << " " << p.status;
  }
}
