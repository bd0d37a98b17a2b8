#pragma once

// Trip-time weight sweeps and the thermal-preconditioning comparison.

#include <string>
#include <vector>

#include "ecoroute/planner.hpp"

namespace ecoroute {

struct SweepOptions {
  PlanOptions plan;
  bool warm_start = true;  // continuation from the previous weight
  // Worker threads. Values > 1 solve every weight cold and independently.
  int parallel = 1;
};

struct ParetoPoint {
  double c_t_trip = 0.0;
  double trip_time = 0.0;      // s, including charging
  double charging_time = 0.0;  // s
  double energy_cost = 0.0;    // total charging energy cost
  std::string status;
  bool negative_weight = false;
  bool cold_fallback = false;  // warm start failed, point re-solved cold
  TripSolution solution;

  bool optimal() const { return status == "optimal"; }
};

struct ParetoFront {
  std::vector<ParetoPoint> points;  // in weight order

  /// Over optimal points sorted by trip time: adjacent pairs where the
  /// energy cost rises with trip time by more than rel_tol (relative).
  int order_reversals(double rel_tol = 1e-6) const;
  /// Header `c_t_trip,trip_time_s,chg_time_s,energy_cost,status`.
  std::string to_csv() const;
};

/// Throws std::invalid_argument for an empty or unsorted weight list.
ParetoFront sweep(const Scenario& scn, const std::vector<double>& weights,
                  const SweepOptions& opts = {});

struct CaseReport {
  std::string label;
  std::string status;
  double trip_time = 0.0;      // s
  double charging_time = 0.0;  // s
  double energy_cost = 0.0;
  double total_cost = 0.0;
  TripSolution solution;
};

struct PreconditioningReport {
  double c_t_trip = 0.0;
  CaseReport with_btm;     // Case 1: battery heating/cooling available
  CaseReport without_btm;  // Case 2: battery circuits off, cabin unchanged
  double charging_time_ratio = 0.0;  // Case 2 / Case 1
  double trip_time_ratio = 0.0;
  double energy_cost_ratio = 0.0;

  std::string to_json() const;
};

/// Case 1 vs Case 2 at weight `c_t_trip`. Throws std::invalid_argument when
/// the scenario has no charger.
PreconditioningReport preconditioning_study(const Scenario& scn, double c_t_trip,
                                            const PlanOptions& opts = {});

/// Copy of `scn` with the battery HVCH/HVAC circuits disabled.
Scenario without_battery_thermal(Scenario scn);

}  // namespace ecoroute
