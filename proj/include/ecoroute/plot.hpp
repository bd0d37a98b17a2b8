#pragma once

// Static SVG line charts of a solved trip.

#include <filesystem>
#include <string>
#include <vector>

#include "ecoroute/scenario.hpp"
#include "ecoroute/trip_solution.hpp"

namespace ecoroute {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f77b4";
  bool dashed = false;
  bool right_axis = false;  // drawn against the secondary y axis
};

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::string y2_label;  // empty: no secondary axis
  std::vector<PlotSeries> series;
};

/// Throws std::invalid_argument when a series has mismatched x/y lengths.
std::string render_svg(const Chart& chart, int width = 800, int height = 420);

/// Node times of a trip, s: driving nodes by the trapezoid rule on 1/v,
/// charging nodes at arrival + tau * t_chg. One vector per segment/charge.
struct TripTimeline {
  std::vector<std::vector<double>> segment_t;
  std::vector<std::vector<double>> charge_t;
};
TripTimeline trip_timeline(const TripSolution& sol);

/// The four trip panels: speed.svg (with altitude and limits when `scn` is
/// given), soc.svg, battery_temperature.svg and powers.svg. Returns the
/// written paths.
std::vector<std::filesystem::path> write_trip_plots(const std::filesystem::path& dir,
                                                    const TripSolution& sol,
                                                    const Scenario* scn = nullptr);

}  // namespace ecoroute
