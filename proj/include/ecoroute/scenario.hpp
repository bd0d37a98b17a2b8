#pragma once

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ecoroute {

/// Raised for malformed input files (syntax, missing keys, wrong types).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A violated scenario invariant. `field()` is the dotted path of the
/// offending entry, e.g. "chargers[0].s_chg".
class ValidationError : public std::runtime_error {
 public:
  ValidationError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct RoadBreakpoint {
  double s = 0.0;         // m
  double altitude = 0.0;  // m
  double v_min = 0.0;     // m/s
  double v_max = 0.0;     // m/s

  bool operator==(const RoadBreakpoint&) const = default;
};

/// Road geometry and speed limits along the route. Gradients are derived
/// from altitude when the profile is built.
class RoadProfile {
 public:
  static constexpr double kMaxGradient = 0.2;  // rad

  RoadProfile() = default;
  /// Validates the breakpoints and derives the gradient at each of them by
  /// central differences of altitude (one-sided at the ends).
  explicit RoadProfile(std::vector<RoadBreakpoint> points);

  const std::vector<RoadBreakpoint>& points() const { return points_; }
  const std::vector<double>& breakpoint_gradients() const { return alpha_; }
  double length() const { return points_.empty() ? 0.0 : points_.back().s; }

  // Piecewise-linear interpolation between breakpoints, clamped at the ends.
  double gradient_at(double s) const;
  double altitude_at(double s) const;
  double v_min_at(double s) const;
  double v_max_at(double s) const;

  bool operator==(const RoadProfile& other) const {
    return points_ == other.points_;
  }

 private:
  template <typename Getter>
  double interpolate(double s, Getter&& get) const;

  std::vector<RoadBreakpoint> points_;
  std::vector<double> alpha_;
};

struct ChargerSpec {
  double s = 0.0;           // position, m
  double p_grid_max = 0.0;  // W
  double c_e = 0.0;         // currency / J
  double c_T = 0.0;         // currency / s beyond t_free
  double t_free = 0.0;      // s
  double t_chg_max = 0.0;   // s

  bool operator==(const ChargerSpec&) const = default;
};

/// Battery power-limit surfaces on a (soc, temperature) grid. Rows index
/// soc, columns index temperature.
struct PowerLimitGrid {
  std::vector<double> soc;
  std::vector<double> temperature;  // degC
  Eigen::MatrixXd discharge_max;    // W, >= 0
  Eigen::MatrixXd charge_min;       // W, <= 0

  bool operator==(const PowerLimitGrid& o) const {
    return soc == o.soc && temperature == o.temperature &&
           discharge_max == o.discharge_max && charge_min == o.charge_min;
  }
};

/// Open-circuit voltage, internal resistance and power-limit surrogates.
struct BatteryMaps {
  double u0 = 300.0;       // V at soc = 0
  double u1 = 100.0;       // V per unit soc
  double r_ref = 0.05;     // ohm at t_ref
  double t_ref = 25.0;     // degC
  double k_r = 0.02;       // 1/K
  double r_floor = 0.005;  // ohm
  double r_cap = 1.0;      // ohm
  PowerLimitGrid limits;

  bool operator==(const BatteryMaps&) const = default;
};

/// Default 5x5 power-limit surrogate: discharge plateau above 25 % soc,
/// charge plateau below 60 % soc, temperature plateau from 25 degC up.
PowerLimitGrid default_power_limit_grid();

struct VehicleParams {
  double mass = 2200.0;          // kg
  double frontal_area = 1.36;    // m^2
  double drag_coeff = 0.6;
  double roll_coeff = 0.013;
  double air_density = 1.29;     // kg/m^3
  double gravity = 9.81;         // m/s^2
  double capacity = 200.0 * 3600.0;  // C
  double cp_mb = 375000.0;       // J/K
  double eta_hvch = 0.87;
  double eta_hvac = 0.87;
  double p_hvch_max = 7000.0;    // W, shared by cabin and battery circuits
  double p_hvac_max = 5000.0;    // W
  double p_aux = 500.0;          // W
  double p_hvch_cabin = 1500.0;  // W while driving
  double gamma0 = 5.0;           // W/K
  double gamma1 = 0.3;           // W s/(K m)
  // Drivetrain loss: k0 + k1 (F v)^2 / p_base + k2 v^2
  double k0 = 500.0;             // W
  double k1 = 0.05;
  double k2 = 0.3;               // W s^2/m^2
  double p_base = 1.0e5;         // W
  double eps_ed = 0.1;           // share of drivetrain loss heating the pack
  // Traction limits
  double a_cap = 3.0;            // m/s^2
  double p_em_max = 220.0e3;     // W
  double v_eps = 1.0;            // m/s
  /// When false the battery HVCH/HVAC circuits are forced off; cabin
  /// heating is unaffected.
  bool battery_thermal = true;

  double air_coefficient() const {
    return air_density * drag_coeff * frontal_area / mass;
  }
  double hvch_battery_max_driving() const {
    return battery_thermal ? p_hvch_max - p_hvch_cabin : 0.0;
  }
  double hvch_battery_max_charging() const {
    return battery_thermal ? p_hvch_max : 0.0;
  }
  double hvac_battery_max() const { return battery_thermal ? p_hvac_max : 0.0; }

  bool operator==(const VehicleParams&) const = default;
};

struct BoundaryConditions {
  double t_b0 = -10.0;       // degC
  double soc_0 = 0.8;
  double v_0 = 25.0;         // m/s
  double t_bf_min = -30.0;   // degC
  double soc_f_min = 0.8;
  double t_amb = -10.0;      // degC
  double t_b_min = -30.0;
  double t_b_max = 60.0;
  double soc_min = 0.05;
  double soc_max = 0.95;

  bool operator==(const BoundaryConditions&) const = default;
};

struct CostWeights {
  double c_t_trip = 0.0;  // currency / s, may be negative

  bool operator==(const CostWeights&) const = default;
};

struct Scenario {
  RoadProfile road;
  std::vector<ChargerSpec> chargers;
  VehicleParams vehicle;
  BatteryMaps battery;
  BoundaryConditions boundary;
  CostWeights costs;

  bool operator==(const Scenario&) const = default;
};

/// Checks every scenario invariant; throws ValidationError naming the first
/// offending field.
void validate(const Scenario& scn);

/// Loads a YAML scenario file (schema_version 1). Relative sidecar paths are
/// resolved against the scenario file's directory.
Scenario load_scenario(const std::filesystem::path& path);
Scenario parse_scenario(const std::string& text,
                        const std::filesystem::path& base_dir = ".");

/// Serializes to the same schema with all road and grid data inline.
std::string serialize_scenario(const Scenario& scn);

/// Reads a `s_m,alt_m,vmin_mps,vmax_mps` road sidecar.
std::vector<RoadBreakpoint> read_road_csv(const std::filesystem::path& path);
/// Reads a `soc,T_b_C,P_dchg_max_W,P_chg_min_W` grid, row-major over soc.
PowerLimitGrid read_power_limit_csv(const std::filesystem::path& path);
void write_power_limit_csv(const std::filesystem::path& path,
                           const PowerLimitGrid& grid);

/// Node-sampled road used by the transcription.
struct RoadGrid {
  std::vector<double> s;
  std::vector<double> alpha;
  std::vector<double> altitude;
  std::vector<double> v_min;
  std::vector<double> v_max;
  std::vector<int> charger_nodes;     // one per charger, ascending
  std::vector<std::string> warnings;  // snapping notes

  int size() const { return static_cast<int>(s.size()); }
};

/// Samples the profile every `ds` metres (the last interval may be shorter)
/// and snaps each charger position to its nearest node. A snap farther than
/// ds/2, a charger at the start node, or two chargers on one node is an error.
RoadGrid resample_road(const RoadProfile& profile, double ds,
                       std::span<const double> charger_positions = {});

/// Grid for a scenario, with its chargers snapped.
RoadGrid resample_road(const Scenario& scn, double ds);

}  // namespace ecoroute
