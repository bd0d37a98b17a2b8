#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "ecoroute/dynamics.hpp"
#include "ecoroute/rk4.hpp"
#include "ecoroute/transcription.hpp"
#include "ecoroute/validator.hpp"

using namespace ecoroute;

namespace {

Scenario flat_scenario(double length, const std::string& chargers, double c_t = 0.02) {
  const std::string text = "schema_version: 1\nroad:\n  breakpoints:\n    - [0, 0, 18.0, 30.5]\n"
                           "    - [" + std::to_string(length) + ", 0, 18.0, 30.5]\n" +
                           chargers + "costs:\n  c_t_trip_per_s: " + std::to_string(c_t) +
                           "\nboundary:\n  v_0_mps: 24\n  soc_f_min: 0.2\n";
  return parse_scenario(text);
}

Scenario reference() { return load_scenario(ECOROUTE_DATA "/reference_cold.yaml"); }

}  // namespace

TEST(Layout, TerminalChargerCount) {
  // 10 nodes, one charger on the final node, 5 tau nodes.
  const auto scn = flat_scenario(9000, "chargers:\n  - s_m: 9000\n    p_grid_max_W: 150000\n");
  Transcription tr(scn, {.ds = 1000.0, .n_tau = 5});
  EXPECT_EQ(tr.num_variables(), 10 * 7 + 1 + 1 + 5 * 6);
  EXPECT_TRUE(tr.layout().terminal_charge());
  EXPECT_EQ(tr.layout().segments().size(), 1u);
}

TEST(Layout, MidRouteChargerDuplicatesNode) {
  const auto scn = flat_scenario(10000, "chargers:\n  - s_m: 4000\n    p_grid_max_W: 150000\n");
  Transcription tr(scn, {.ds = 2000.0, .n_tau = 4});
  const auto& L = tr.layout();
  ASSERT_EQ(L.segments().size(), 2u);
  EXPECT_EQ(L.segments()[0].n_nodes, 3);
  EXPECT_EQ(L.segments()[1].n_nodes, 4);
  EXPECT_EQ(L.segments()[1].first_node, 2);
  EXPECT_EQ(tr.num_variables(), 7 * 7 + 2 + 4 * 6);
  EXPECT_EQ(L.drive(1, 0, kFieldE), 3 * 7 + 2 + 4 * 6);
}

TEST(Layout, NoChargersIsPureEcoDriving) {
  const auto scn = flat_scenario(10000, "");
  Transcription tr(scn);
  EXPECT_EQ(tr.num_variables(), 6 * 7);
  EXPECT_TRUE(tr.layout().charges().empty());
  const auto z = tr.initial_guess();
  NlpEval ev;
  tr.evaluate(z, ev, false);
  const auto sol = tr.extract_solution(z);
  EXPECT_NEAR(ev.f, 0.02 * sol.driving_time, 1e-12);
  EXPECT_TRUE(sol.charges.empty());
  EXPECT_EQ(sol.costs.energy_cost_total(), 0.0);
}

TEST(InitialGuess, MidBandSpeedAndBounds) {
  const auto scn = flat_scenario(10000, "chargers:\n  - s_m: 6000\n    p_grid_max_W: 150000\n");
  Transcription tr(scn);
  const auto z = tr.initial_guess();
  EXPECT_TRUE((z.array() >= tr.lower().array()).all());
  EXPECT_TRUE((z.array() <= tr.upper().array()).all());
  const auto sol = tr.extract_solution(z);
  EXPECT_DOUBLE_EQ(sol.segments[0].v[0], 24.0);
  for (std::size_t k = 1; k < sol.segments[0].size(); ++k)
    EXPECT_NEAR(sol.segments[0].v[k], 0.5 * (18.0 + 30.5), 1e-12);
}

TEST(InitialGuess, ReferenceDefectsModerate) {
  Transcription tr(reference());
  const auto sc = tr.scaled();
  NlpEval ev;
  sc->evaluate(sc->initial_guess(), ev, false);
  EXPECT_TRUE(ev.ceq.allFinite());
  EXPECT_LT(ev.ceq.lpNorm<Eigen::Infinity>(), 1e3);
}

TEST(Extract, PackRoundTripAndCostIdentity) {
  Transcription tr(reference());
  const auto z = tr.random_point(3);
  const auto sol = tr.extract_solution(z);
  EXPECT_EQ(tr.pack(sol), z);
  EXPECT_EQ(tr.extract_solution(tr.pack(sol)), sol);
  EXPECT_EQ(sol.costs.total, sol.costs.trip_time_cost + sol.costs.energy_cost_total() +
                                 sol.costs.occupancy_cost_total());
  NlpEval ev;
  tr.evaluate(z, ev, false);
  EXPECT_NEAR(ev.f, sol.costs.total, 1e-9 * std::abs(ev.f));
  EXPECT_THROW(tr.extract_solution(z.head(10)), std::invalid_argument);
}

TEST(Extract, SummaryFormat) {
  TripSolution sol;
  sol.driving_time = 257 * 60.0;
  sol.charging_time = 37 * 60.0;
  sol.costs.energy_cost = {453.0};
  sol.costs.occupancy_cost = {0.0};
  EXPECT_EQ(sol.summary(), "294 (37) 453.0");
}

TEST(Scaling, RoundTripExact) {
  Transcription tr(reference());
  const auto sc = tr.scaled();
  const auto z = tr.random_point(5);
  EXPECT_EQ(sc->to_unscaled(sc->to_scaled(z)), z);
  for (int i = 0; i < z.size(); ++i) {
    int e = 0;
    EXPECT_EQ(std::frexp(tr.variable_scale()[i], &e), 0.5);
  }
}

TEST(Derivatives, MatchFiniteDifferencesOnReference) {
  // Checked in the scaled formulation the solver sees, where every variable
  // is O(1) and a row's entries are comparable.
  Transcription tr(reference());
  const auto sc = tr.scaled();
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto z = sc->to_scaled(tr.random_point(seed));
    const auto chk = check_derivatives(*sc, z);
    EXPECT_LE(chk.max_rel_error, 1e-5) << "row " << chk.worst_row << " col " << chk.worst_col;
    EXPECT_EQ(chk.pattern_violations, 0);
  }
  const auto chk = check_derivatives(*sc, sc->initial_guess());
  EXPECT_LE(chk.max_rel_error, 1e-5) << "row " << chk.worst_row << " col " << chk.worst_col;
}

namespace {

// Node states of the time-domain replay under constant controls.
std::vector<DrivingState<double>> replay_nodes(const Scenario& scn, const std::vector<double>& s,
                                               double hvch, double hvac, double a) {
  DrivingSegment seg;
  seg.s = s;
  const std::size_t n = s.size();
  seg.v.assign(n, 24.0);
  seg.E.assign(n, 0.5 * 24.0 * 24.0);
  seg.soc.assign(n, scn.boundary.soc_0);
  seg.t_b.assign(n, scn.boundary.t_b0);
  seg.p_hvch.assign(n, hvch);
  seg.p_hvac.assign(n, hvac);
  seg.a_t.assign(n, a);
  seg.p_b.assign(n, 0.0);
  TripSolution sol;
  sol.segments.push_back(seg);
  const auto trace = simulate_time_domain(scn, sol, 0.02);
  std::vector<DrivingState<double>> out;
  std::size_t k = 0;
  for (const auto& smp : trace.samples)
    if (k < n && smp.s == s[k]) {
      out.emplace_back(0.5 * smp.v * smp.v, smp.soc, smp.t_b);
      ++k;
    }
  EXPECT_EQ(out.size(), n);
  return out;
}

// Packs an integrated trajectory with constant controls into `tr`'s layout
// (single segment) and returns the largest driving defect.
double witness_defect(const Scenario& scn, double ds, double hvch, double hvac, double a) {
  Transcription tr(scn, {.ds = ds});
  Eigen::VectorXd z = tr.initial_guess();
  const auto& g = tr.grid();
  const auto nodes = replay_nodes(scn, g.s, hvch, hvac, a);
  const auto& L = tr.layout();
  for (int k = 0; k < g.size(); ++k) {
    const auto& x = nodes[k];
    z[L.drive(0, k, kFieldE)] = x[kE];
    z[L.drive(0, k, kFieldSoc)] = x[kSocD];
    z[L.drive(0, k, kFieldTb)] = x[kTbD];
    z[L.drive(0, k, kFieldHvch)] = hvch;
    z[L.drive(0, k, kFieldHvac)] = hvac;
    z[L.drive(0, k, kFieldAt)] = a;
  }
  NlpEval ev;
  tr.evaluate(z, ev, false);
  // Defect rows are the 3-row blocks; power balances are not part of the
  // witness, so look at state rows only: the defect blocks carry the only
  // equality rows that involve the next node's state.
  double worst = 0.0;
  const auto& p = tr.equality_pattern();
  for (int r = 0; r < p.rows(); ++r) {
    if (p.outerIndexPtr()[r + 1] - p.outerIndexPtr()[r] != 9) continue;
    worst = std::max(worst, std::abs(ev.ceq[r]) / tr.equality_scale()[r]);
  }
  return worst;
}

}  // namespace

TEST(Defects, SimulatorWitnessOnFlatCruise) {
  auto scn = flat_scenario(10000, "");
  const double e = 0.5 * 24.0 * 24.0;
  const double a = accel_air(e, scn.vehicle) + accel_grade_roll(0.0, scn.vehicle);
  EXPECT_LT(witness_defect(scn, 2000.0, 1000.0, 0.0, a), 1e-9);
}

TEST(Defects, FourthOrderUnderStepHalving) {
  // Accelerating up a constant 1 % grade with heating on, so every state
  // moves. The grade is constant because a piecewise-linear gradient has
  // kinks at its breakpoints, where RK4 loses an order.
  auto scn = reference();
  scn.chargers.clear();
  scn.boundary.soc_f_min = scn.boundary.soc_min;
  scn.road = RoadProfile({{0, 0, 18.0, 30.5}, {60000, 600, 18.0, 30.5}});
  std::vector<double> d;
  for (double ds : {4000.0, 2000.0, 1000.0}) d.push_back(witness_defect(scn, ds, 3000.0, 0.0, 0.35));
  EXPECT_GT(std::log2(d[0] / d[1]), 3.9);
  EXPECT_GT(std::log2(d[1] / d[2]), 3.9);
}
