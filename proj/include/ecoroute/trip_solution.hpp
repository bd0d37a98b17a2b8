#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace ecoroute {

/// Node values of one driving segment between two stops.
struct DrivingSegment {
  std::vector<double> s;       // m
  std::vector<double> E;       // m^2/s^2
  std::vector<double> v;       // m/s
  std::vector<double> soc;
  std::vector<double> t_b;     // degC
  std::vector<double> p_hvch;  // W, battery HVCH share
  std::vector<double> p_hvac;  // W
  std::vector<double> a_t;     // m/s^2
  std::vector<double> p_b;     // W

  std::size_t size() const { return s.size(); }
  bool operator==(const DrivingSegment&) const = default;
};

/// Node values of one charging phase over normalized time tau in [0, 1].
struct ChargingPhase {
  int charger = 0;  // index into Scenario::chargers
  double s = 0.0;   // m, snapped charger position
  double t_chg = 0.0;  // s
  double sigma = 0.0;  // s, occupancy beyond the free time
  std::vector<double> tau;
  std::vector<double> soc;
  std::vector<double> t_b;
  std::vector<double> p_hvch;
  std::vector<double> p_hvac;
  std::vector<double> p_grid;
  std::vector<double> p_b;

  std::size_t size() const { return tau.size(); }
  bool operator==(const ChargingPhase&) const = default;
};

struct CostBreakdown {
  double trip_time_cost = 0.0;            // c_t_trip * total trip time
  std::vector<double> energy_cost;        // per charger
  std::vector<double> occupancy_cost;     // per charger
  double total = 0.0;

  double energy_cost_total() const;
  double occupancy_cost_total() const;
  bool operator==(const CostBreakdown&) const = default;
};

struct SolverDiagnostics {
  std::string status;  // optimal | max_iter | infeasible_stationary
  double kkt_residual = 0.0;
  int outer_iterations = 0;
  int inner_iterations = 0;
  int evaluations = 0;
  double wall_time_s = 0.0;
  double objective = 0.0;

  bool operator==(const SolverDiagnostics&) const = default;
};

/// A solved (or candidate) trip. Driving segments and charging phases
/// alternate, starting with a driving segment: segments[i] ends at the
/// charger of charges[i]. A charger at the route end has no segment after it.
struct TripSolution {
  double c_t_trip = 0.0;
  std::vector<DrivingSegment> segments;
  std::vector<ChargingPhase> charges;
  double driving_time = 0.0;   // s
  double charging_time = 0.0;  // s
  CostBreakdown costs;
  SolverDiagnostics diagnostics;

  double trip_time() const { return driving_time + charging_time; }
  /// Final battery state: end of the last segment or of a terminal charge.
  double final_soc() const;
  double final_t_b() const;
  /// "trip_min (chg_min) cost", e.g. "294 (37) 453.0".
  std::string summary() const;

  bool operator==(const TripSolution&) const = default;
};

std::string to_json(const TripSolution& sol);
TripSolution trip_solution_from_json(const std::string& text);
TripSolution load_trip_solution(const std::filesystem::path& path);

/// Writes solution.json plus one CSV per driving segment and charging phase
/// into `dir`; returns the written paths.
std::vector<std::filesystem::path> write_trip_solution(
    const std::filesystem::path& dir, const TripSolution& sol);

}  // namespace ecoroute
