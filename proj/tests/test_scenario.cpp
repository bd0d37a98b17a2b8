#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "ecoroute/scenario.hpp"

using namespace ecoroute;
namespace fs = std::filesystem;

namespace {

const fs::path kData = ECOROUTE_TEST_DATA;

RoadProfile flat(double length, double vmin = 18.0, double vmax = 30.0) {
  return RoadProfile({{0.0, 0.0, vmin, vmax}, {length, 0.0, vmin, vmax}});
}

template <typename F>
std::string validation_field(F&& f) {
  try {
    f();
  } catch (const ValidationError& e) {
    return e.field();
  }
  return "<no error>";
}

}  // namespace

TEST(LoadScenario, MinimalFlatRoadWithOneCharger) {
  const auto scn = load_scenario(kData / "flat_one_charger.yaml");
  ASSERT_EQ(scn.chargers.size(), 1u);
  EXPECT_DOUBLE_EQ(scn.chargers[0].s, 5000.0);
  EXPECT_DOUBLE_EQ(scn.chargers[0].p_grid_max, 150000.0);
  EXPECT_DOUBLE_EQ(scn.chargers[0].c_e, 5.0 / 3.6e6);
  EXPECT_DOUBLE_EQ(scn.road.length(), 10000.0);
  EXPECT_DOUBLE_EQ(scn.costs.c_t_trip, 0.02);
  EXPECT_DOUBLE_EQ(scn.boundary.v_0, 24.0);
  for (double a : scn.road.breakpoint_gradients()) EXPECT_EQ(a, 0.0);
}

TEST(LoadScenario, TableOneParameterBlock) {
  const auto scn = load_scenario(kData / "table1.yaml");
  const auto& v = scn.vehicle;
  EXPECT_DOUBLE_EQ(v.mass, 2200.0);
  EXPECT_DOUBLE_EQ(v.drag_coeff, 0.6);
  EXPECT_DOUBLE_EQ(v.frontal_area, 1.36);
  EXPECT_DOUBLE_EQ(v.roll_coeff, 0.013);
  EXPECT_DOUBLE_EQ(v.air_density, 1.29);
  EXPECT_DOUBLE_EQ(v.cp_mb, 375000.0);
  EXPECT_DOUBLE_EQ(v.capacity, 200.0 * 3600.0);
  EXPECT_EQ(scn.road.points().size(), 5u);
}

TEST(LoadScenario, ChargerBeyondRouteEndNamesField) {
  Scenario scn;
  scn.road = flat(10000.0);
  scn.chargers.push_back({12000.0, 150e3, 1e-6, 0.0, 0.0, 3600.0});
  const auto field = validation_field([&] { validate(scn); });
  EXPECT_NE(field.find("s_chg"), std::string::npos) << field;
}

TEST(LoadScenario, ValidationErrorsNameTheField) {
  Scenario base;
  base.road = flat(10000.0);
  base.battery.limits = default_power_limit_grid();
  base.boundary.v_0 = 20.0;
  EXPECT_EQ(validation_field([&] { validate(base); }), "<no error>");

  auto scn = base;
  scn.vehicle.eta_hvch = 1.2;
  EXPECT_EQ(validation_field([&] { validate(scn); }), "thermal.eta_hvch");

  scn = base;
  scn.boundary.soc_0 = 0.01;
  EXPECT_EQ(validation_field([&] { validate(scn); }), "boundary.soc_0");

  scn = base;
  scn.battery.limits.discharge_max(2, 1) = 1e6;  // breaks monotonicity in T
  EXPECT_NE(validation_field([&] { validate(scn); }).find("P_dchg_max_W"),
            std::string::npos);

  scn = base;
  scn.chargers = {{6000.0, 1e5, 0.0, 0.0, 0.0, 600.0},
                  {4000.0, 1e5, 0.0, 0.0, 0.0, 600.0}};
  EXPECT_EQ(validation_field([&] { validate(scn); }), "chargers[1].s_chg");

  EXPECT_EQ(validation_field([] {
              RoadProfile({{0, 0, 20, 30}, {100, 0, 25, 20}});
            }),
            "road.breakpoints[1].v_max");
  EXPECT_EQ(validation_field([] {
              RoadProfile({{0, 0, 20, 30}, {0, 0, 20, 30}});
            }),
            "road.breakpoints[1].s");
}

TEST(LoadScenario, ParseErrors) {
  EXPECT_THROW(parse_scenario("schema_version: 1\nroad: [1, 2"), ParseError);
  EXPECT_THROW(parse_scenario("schema_version: 2\nroad: {breakpoints: []}"),
               ParseError);
  EXPECT_THROW(parse_scenario("schema_version: 1\n"
                              "road: {breakpoints: [[0,0,20,30],[100,0,20,30]]}\n"
                              "vehicle: {mass: 2000}\n"),
               ParseError);  // misspelt key (mass_kg)
  EXPECT_THROW(parse_scenario("schema_version: 1\n"
                              "road: {breakpoints: [[0,0,20,30],[100,0,x,30]]}\n"),
               ParseError);
  EXPECT_THROW(load_scenario(kData / "does_not_exist.yaml"), ParseError);
}

TEST(LoadScenario, RoundTripThroughSerializer) {
  for (const char* name : {"flat_one_charger.yaml", "table1.yaml"}) {
    const auto scn = load_scenario(kData / name);
    const auto text = serialize_scenario(scn);
    const auto again = parse_scenario(text);
    EXPECT_TRUE(again == scn) << name << "\n" << text;
    EXPECT_EQ(serialize_scenario(again), text);
  }
}

TEST(LoadScenario, RoundTripRandomParameters) {
  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Scenario scn;
    std::vector<RoadBreakpoint> pts;
    double s = 0.0;
    for (int i = 0; i < 6; ++i) {
      const double vmin = 10.0 + 10.0 * u(rng);
      pts.push_back({s, 100.0 * u(rng), vmin, vmin + 15.0 * u(rng)});
      s += 500.0 + 3000.0 * u(rng);
    }
    scn.road = RoadProfile(pts);
    scn.chargers.push_back({0.5 * scn.road.length(), 5e4 + 1e5 * u(rng),
                            u(rng) * 1e-6, u(rng) * 0.01, 600.0 * u(rng),
                            1200.0 + 1200.0 * u(rng)});
    scn.vehicle.mass = 1500.0 + 1000.0 * u(rng);
    scn.vehicle.eps_ed = u(rng);
    scn.vehicle.battery_thermal = u(rng) < 0.5;
    scn.battery.limits = default_power_limit_grid();
    scn.battery.k_r = 0.01 + 0.02 * u(rng);
    scn.boundary.v_0 = pts[0].v_min;
    scn.costs.c_t_trip = u(rng) - 0.5;
    validate(scn);
    const auto back = parse_scenario(serialize_scenario(scn));
    EXPECT_TRUE(back == scn) << "trial " << trial;
  }
}

TEST(LoadScenario, PowerLimitCsvRoundTrip) {
  const auto path = fs::temp_directory_path() / "ecoroute_limits.csv";
  const auto g = default_power_limit_grid();
  write_power_limit_csv(path, g);
  EXPECT_TRUE(read_power_limit_csv(path) == g);

  std::ofstream(path) << "soc,T_b_C,P_dchg_max_W,P_chg_min_W\n0,0,1,0\n0,1,2,0\n1,0,3,0\n";
  EXPECT_THROW(read_power_limit_csv(path), ParseError);
  std::ofstream(path) << "soc,T,P_dchg_max_W,P_chg_min_W\n";
  EXPECT_THROW(read_power_limit_csv(path), ParseError);
  fs::remove(path);
}

TEST(ResampleRoad, FlatTenKilometres) {
  const auto grid = resample_road(flat(10000.0), 2000.0);
  ASSERT_EQ(grid.size(), 6);
  for (int k = 0; k < 6; ++k) {
    EXPECT_DOUBLE_EQ(grid.s[k], 2000.0 * k);
    EXPECT_EQ(grid.alpha[k], 0.0);
  }
}

TEST(ResampleRoad, LinearAltitudeGivesConstantGradient) {
  const RoadProfile road({{0, 0, 18, 30}, {10000, 100, 18, 30}});
  const auto grid = resample_road(road, 2000.0);
  ASSERT_EQ(grid.size(), 6);
  for (double a : grid.alpha) EXPECT_NEAR(a, 0.009999666686665238, 1e-12);
}

TEST(ResampleRoad, LinearAltitudeManyBreakpoints) {
  std::vector<RoadBreakpoint> pts;
  for (double s : {0.0, 700.0, 1500.0, 4100.0, 6000.0, 9999.0})
    pts.push_back({s, 12.0 - 0.03 * s, 18, 30});
  const auto grid = resample_road(RoadProfile(pts), 500.0);
  for (double a : grid.alpha) EXPECT_NEAR(a, std::atan(-0.03), 1e-12);
}

TEST(ResampleRoad, GradientIsCapped) {
  const RoadProfile road({{0, 0, 5, 10}, {100, 60, 5, 10}});
  for (double a : road.breakpoint_gradients())
    EXPECT_DOUBLE_EQ(a, RoadProfile::kMaxGradient);
}

TEST(ResampleRoad, ChargerSnapsToNearestNodeWithWarning) {
  const std::vector<double> chargers{3100.0};
  const auto grid = resample_road(flat(10000.0), 2000.0, chargers);
  ASSERT_EQ(grid.charger_nodes.size(), 1u);
  EXPECT_EQ(grid.charger_nodes[0], 2);
  EXPECT_DOUBLE_EQ(grid.s[2], 4000.0);
  ASSERT_EQ(grid.warnings.size(), 1u);
  EXPECT_NE(grid.warnings[0].find("snapped"), std::string::npos);

  const std::vector<double> exact{6000.0};
  EXPECT_TRUE(resample_road(flat(10000.0), 2000.0, exact).warnings.empty());
}

TEST(ResampleRoad, SnappingErrors) {
  const std::vector<double> at_start{400.0};
  EXPECT_THROW(resample_road(flat(10000.0), 2000.0, at_start), ValidationError);
  const std::vector<double> same_node{3900.0, 4100.0};
  EXPECT_THROW(resample_road(flat(10000.0), 2000.0, same_node), ValidationError);
  EXPECT_THROW(resample_road(flat(10000.0), 0.0), ValidationError);
  EXPECT_THROW(resample_road(RoadProfile(), 100.0), ValidationError);
}

TEST(ResampleRoad, ShortFinalInterval) {
  const auto grid = resample_road(flat(10500.0), 2000.0);
  ASSERT_EQ(grid.size(), 7);
  EXPECT_DOUBLE_EQ(grid.s.back(), 10500.0);
  EXPECT_DOUBLE_EQ(grid.s[5], 10000.0);
}

TEST(ResampleRoad, RandomProfilesAreMonotoneAndContainChargers) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<RoadBreakpoint> pts;
    double s = 0.0;
    const int n = 2 + static_cast<int>(8 * u(rng));
    for (int i = 0; i < n; ++i) {
      pts.push_back({s, 50.0 * u(rng), 15.0, 30.0});
      s += 200.0 + 5000.0 * u(rng);
    }
    const RoadProfile road(pts);
    const double ds = 100.0 + 1900.0 * u(rng);
    std::vector<double> chargers;
    if (road.length() > 3 * ds) chargers.push_back(road.length() * (0.3 + 0.4 * u(rng)));
    const auto grid = resample_road(road, ds, chargers);
    EXPECT_EQ(grid.s.front(), 0.0);
    EXPECT_EQ(grid.s.back(), road.length());
    for (int k = 1; k < grid.size(); ++k) {
      EXPECT_GT(grid.s[k], grid.s[k - 1]);
      EXPECT_LE(grid.s[k] - grid.s[k - 1], ds * (1 + 1e-12));
    }
    for (std::size_t i = 0; i < chargers.size(); ++i)
      EXPECT_LE(std::abs(grid.s[grid.charger_nodes[i]] - chargers[i]), 0.5 * ds + 1e-9);
  }
}
