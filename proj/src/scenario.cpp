#include "ecoroute/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "csv.hpp"

namespace ecoroute {

namespace {

constexpr double kJoulePerKwh = 3.6e6;

bool finite(double x) { return std::isfinite(x); }

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ValidationError(field, what);
}

std::string idx(const std::string& base, std::size_t i) {
  return base + "[" + std::to_string(i) + "]";
}

}  // namespace

// --- RoadProfile ----------------------------------------------------------

RoadProfile::RoadProfile(std::vector<RoadBreakpoint> points)
    : points_(std::move(points)) {
  require(points_.size() >= 2, "road.breakpoints",
          "need at least 2 breakpoints, got " + std::to_string(points_.size()));
  require(points_.front().s == 0.0, "road.breakpoints[0].s",
          "route must start at s = 0");
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const auto& p = points_[i];
    const auto base = idx("road.breakpoints", i);
    require(finite(p.s), base + ".s", "not finite");
    require(finite(p.altitude), base + ".altitude", "not finite");
    require(finite(p.v_min) && p.v_min > 0.0, base + ".v_min",
            "must be > 0");
    require(finite(p.v_max) && p.v_max >= p.v_min, base + ".v_max",
            "must be >= v_min");
    if (i > 0) {
      require(p.s > points_[i - 1].s, base + ".s",
              "positions must be strictly increasing");
    }
  }

  const auto n = points_.size();
  alpha_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i == 0 ? 0 : i - 1;
    const std::size_t hi = i + 1 == n ? n - 1 : i + 1;
    const double slope = (points_[hi].altitude - points_[lo].altitude) /
                         (points_[hi].s - points_[lo].s);
    alpha_[i] = std::clamp(std::atan(slope), -kMaxGradient, kMaxGradient);
  }
}

template <typename Getter>
double RoadProfile::interpolate(double s, Getter&& get) const {
  if (points_.empty()) return 0.0;
  if (s <= points_.front().s) return get(0);
  if (s >= points_.back().s) return get(points_.size() - 1);
  const auto it = std::upper_bound(
      points_.begin(), points_.end(), s,
      [](double v, const RoadBreakpoint& p) { return v < p.s; });
  const std::size_t hi = static_cast<std::size_t>(it - points_.begin());
  const std::size_t lo = hi - 1;
  const double w = (s - points_[lo].s) / (points_[hi].s - points_[lo].s);
  return (1.0 - w) * get(lo) + w * get(hi);
}

double RoadProfile::gradient_at(double s) const {
  return interpolate(s, [&](std::size_t i) { return alpha_[i]; });
}
double RoadProfile::altitude_at(double s) const {
  return interpolate(s, [&](std::size_t i) { return points_[i].altitude; });
}
double RoadProfile::v_min_at(double s) const {
  return interpolate(s, [&](std::size_t i) { return points_[i].v_min; });
}
double RoadProfile::v_max_at(double s) const {
  return interpolate(s, [&](std::size_t i) { return points_[i].v_max; });
}

// --- Power-limit grid ------------------------------------------------------

PowerLimitGrid default_power_limit_grid() {
  PowerLimitGrid g;
  g.soc = {0.0, 0.25, 0.6, 0.8, 1.0};
  g.temperature = {-30.0, -10.0, 10.0, 25.0, 45.0};
  g.discharge_max.resize(5, 5);
  g.charge_min.resize(5, 5);
  // kW; rows soc, columns temperature.
  g.discharge_max << 10, 20, 40, 60, 60,
                     30, 70, 140, 200, 200,
                     30, 70, 140, 200, 200,
                     30, 70, 140, 200, 200,
                     30, 70, 140, 200, 200;
  g.charge_min << 10, 30, 90, 150, 150,
                  10, 30, 90, 150, 150,
                  10, 30, 90, 150, 150,
                   5, 15, 45,  75,  75,
                   0,  0,  0,   0,   0;
  g.discharge_max *= 1000.0;
  g.charge_min *= -1000.0;
  return g;
}

namespace {

void validate_grid(const PowerLimitGrid& g) {
  const std::string base = "battery.power_limits";
  require(g.soc.size() >= 2, base + ".soc", "need at least 2 soc nodes");
  require(g.temperature.size() >= 2, base + ".T_b_C",
          "need at least 2 temperature nodes");
  for (std::size_t i = 1; i < g.soc.size(); ++i)
    require(g.soc[i] > g.soc[i - 1], idx(base + ".soc", i),
            "soc nodes must be strictly increasing");
  for (std::size_t i = 1; i < g.temperature.size(); ++i)
    require(g.temperature[i] > g.temperature[i - 1],
            idx(base + ".T_b_C", i),
            "temperature nodes must be strictly increasing");
  const auto rows = static_cast<Eigen::Index>(g.soc.size());
  const auto cols = static_cast<Eigen::Index>(g.temperature.size());
  require(g.discharge_max.rows() == rows && g.discharge_max.cols() == cols,
          base + ".P_dchg_max_W", "shape does not match soc x T_b_C");
  require(g.charge_min.rows() == rows && g.charge_min.cols() == cols,
          base + ".P_chg_min_W", "shape does not match soc x T_b_C");
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      const auto at = "[" + std::to_string(i) + "][" + std::to_string(j) + "]";
      const double d = g.discharge_max(i, j);
      const double c = g.charge_min(i, j);
      require(finite(d) && d >= 0.0, base + ".P_dchg_max_W" + at,
              "must be finite and >= 0");
      require(finite(c) && c <= 0.0, base + ".P_chg_min_W" + at,
              "must be finite and <= 0");
      if (i > 0) {
        require(d >= g.discharge_max(i - 1, j), base + ".P_dchg_max_W" + at,
                "discharge limit must be nondecreasing in soc");
        require(c >= g.charge_min(i - 1, j), base + ".P_chg_min_W" + at,
                "charge limit magnitude must be nonincreasing in soc");
      }
      if (j > 0) {
        require(d >= g.discharge_max(i, j - 1), base + ".P_dchg_max_W" + at,
                "discharge limit must be nondecreasing in temperature");
        require(c <= g.charge_min(i, j - 1), base + ".P_chg_min_W" + at,
                "charge limit magnitude must be nondecreasing in temperature");
      }
    }
  }
}

}  // namespace

// --- Validation ------------------------------------------------------------

void validate(const Scenario& scn) {
  // Constructing a RoadProfile validates it; re-run on a copy so that a
  // default-constructed (empty) profile is rejected too.
  RoadProfile check(scn.road.points());
  const double s_f = scn.road.length();

  double prev = 0.0;
  for (std::size_t i = 0; i < scn.chargers.size(); ++i) {
    const auto& c = scn.chargers[i];
    const auto base = idx("chargers", i);
    require(finite(c.s) && c.s > 0.0 && c.s <= s_f, base + ".s_chg",
            "charger position must lie in (0, " + std::to_string(s_f) +
                "], got " + std::to_string(c.s));
    require(c.s > prev || i == 0, base + ".s_chg",
            "charger positions must be strictly increasing");
    prev = c.s;
    require(finite(c.p_grid_max) && c.p_grid_max > 0.0, base + ".p_grid_max",
            "must be > 0");
    require(finite(c.c_e) && c.c_e >= 0.0, base + ".c_e", "must be >= 0");
    require(finite(c.c_T) && c.c_T >= 0.0, base + ".c_T", "must be >= 0");
    require(finite(c.t_free) && c.t_free >= 0.0, base + ".t_free",
            "must be >= 0");
    require(finite(c.t_chg_max) && c.t_chg_max > 1.0, base + ".t_chg_max",
            "must exceed the 1 s charging-time floor");
  }

  const auto& v = scn.vehicle;
  auto positive = [](double x) { return std::isfinite(x) && x > 0.0; };
  auto nonneg = [](double x) { return std::isfinite(x) && x >= 0.0; };
  require(positive(v.mass), "vehicle.mass", "must be > 0");
  require(positive(v.frontal_area), "vehicle.frontal_area", "must be > 0");
  require(positive(v.drag_coeff), "vehicle.drag_coeff", "must be > 0");
  require(positive(v.roll_coeff), "vehicle.roll_coeff", "must be > 0");
  require(positive(v.air_density), "vehicle.air_density", "must be > 0");
  require(positive(v.gravity), "vehicle.gravity", "must be > 0");
  require(positive(v.capacity), "battery.capacity", "must be > 0");
  require(positive(v.cp_mb), "thermal.cp_mb", "must be > 0");
  require(positive(v.eta_hvch) && v.eta_hvch <= 1.0, "thermal.eta_hvch",
          "must lie in (0, 1]");
  require(positive(v.eta_hvac) && v.eta_hvac <= 1.0, "thermal.eta_hvac",
          "must lie in (0, 1]");
  require(nonneg(v.p_hvch_cabin), "thermal.p_hvch_cabin", "must be >= 0");
  require(nonneg(v.p_hvch_max) && v.p_hvch_max >= v.p_hvch_cabin,
          "thermal.p_hvch_max", "must be >= cabin heating demand");
  require(nonneg(v.p_hvac_max), "thermal.p_hvac_max", "must be >= 0");
  require(nonneg(v.p_aux), "vehicle.p_aux", "must be >= 0");
  require(positive(v.gamma0), "thermal.gamma0", "must be > 0");
  require(nonneg(v.gamma1), "thermal.gamma1", "must be >= 0");
  require(positive(v.k0), "vehicle.k0", "must be > 0");
  require(nonneg(v.k1), "vehicle.k1", "must be >= 0");
  require(nonneg(v.k2), "vehicle.k2", "must be >= 0");
  require(positive(v.p_base), "vehicle.p_base", "must be > 0");
  require(nonneg(v.eps_ed) && v.eps_ed <= 1.0, "thermal.eps_ed",
          "must lie in [0, 1]");
  require(positive(v.a_cap), "vehicle.a_cap", "must be > 0");
  require(positive(v.p_em_max), "vehicle.p_em_max", "must be > 0");
  require(positive(v.v_eps), "vehicle.v_eps", "must be > 0");

  const auto& b = scn.battery;
  require(positive(b.u0), "battery.u0", "must be > 0");
  require(positive(b.u1), "battery.u1",
          "must be > 0 (open-circuit voltage increases with soc)");
  require(positive(b.r_ref), "battery.r_ref", "must be > 0");
  require(finite(b.t_ref), "battery.t_ref", "not finite");
  require(positive(b.k_r), "battery.k_r",
          "must be > 0 (resistance decreases with temperature)");
  require(positive(b.r_floor), "battery.r_floor", "must be > 0");
  require(positive(b.r_cap) && b.r_cap >= b.r_floor, "battery.r_cap",
          "must be >= r_floor");
  validate_grid(b.limits);

  const auto& bc = scn.boundary;
  require(nonneg(bc.soc_min) && bc.soc_min <= 1.0, "boundary.soc_min",
          "must lie in [0, 1]");
  require(finite(bc.soc_max) && bc.soc_max <= 1.0 && bc.soc_max > bc.soc_min,
          "boundary.soc_max", "must lie in (soc_min, 1]");
  require(finite(bc.soc_0) && bc.soc_0 >= bc.soc_min && bc.soc_0 <= bc.soc_max,
          "boundary.soc_0", "must lie in [soc_min, soc_max]");
  require(finite(bc.soc_f_min) && bc.soc_f_min <= bc.soc_max,
          "boundary.soc_f_min", "must be <= soc_max");
  require(finite(bc.t_b_min) && finite(bc.t_b_max) && bc.t_b_min < bc.t_b_max,
          "boundary.T_b_max", "must exceed T_b_min");
  require(finite(bc.t_b0) && bc.t_b0 >= bc.t_b_min && bc.t_b0 <= bc.t_b_max,
          "boundary.T_b0", "must lie in [T_b_min, T_b_max]");
  require(finite(bc.t_bf_min) && bc.t_bf_min <= bc.t_b_max,
          "boundary.T_bf_min", "must be <= T_b_max");
  require(finite(bc.t_amb), "boundary.T_amb", "not finite");
  const auto& first = scn.road.points().front();
  require(finite(bc.v_0) && bc.v_0 >= first.v_min && bc.v_0 <= first.v_max,
          "boundary.v_0", "must lie within the speed limits at s = 0");

  require(finite(scn.costs.c_t_trip), "costs.c_t_trip", "not finite");
}

// --- CSV sidecars ------------------------------------------------------------

std::vector<RoadBreakpoint> read_road_csv(const std::filesystem::path& path) {
  const auto table = csv::read(path, {"s_m", "alt_m", "vmin_mps", "vmax_mps"});
  std::vector<RoadBreakpoint> pts;
  pts.reserve(table.size());
  for (const auto& row : table)
    pts.push_back({row[0], row[1], row[2], row[3]});
  return pts;
}

PowerLimitGrid read_power_limit_csv(const std::filesystem::path& path) {
  const auto table =
      csv::read(path, {"soc", "T_b_C", "P_dchg_max_W", "P_chg_min_W"});
  PowerLimitGrid g;
  for (const auto& row : table) {
    if (g.soc.empty() || row[0] != g.soc.back()) g.soc.push_back(row[0]);
    if (g.soc.size() == 1) g.temperature.push_back(row[1]);
  }
  const auto ns = g.soc.size();
  const auto nt = g.temperature.size();
  if (ns * nt != table.size())
    throw ParseError(path.string() + ": power-limit grid is not a full " +
                     "row-major soc x T_b_C table");
  g.discharge_max.resize(static_cast<Eigen::Index>(ns),
                         static_cast<Eigen::Index>(nt));
  g.charge_min.resizeLike(g.discharge_max);
  for (std::size_t i = 0; i < ns; ++i) {
    for (std::size_t j = 0; j < nt; ++j) {
      const auto& row = table[i * nt + j];
      if (row[0] != g.soc[i] || row[1] != g.temperature[j])
        throw ParseError(path.string() + ": row " + std::to_string(i * nt + j + 2) +
                         " breaks the row-major soc x T_b_C ordering");
      g.discharge_max(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[2];
      g.charge_min(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[3];
    }
  }
  return g;
}

void write_power_limit_csv(const std::filesystem::path& path,
                           const PowerLimitGrid& g) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  out << "soc,T_b_C,P_dchg_max_W,P_chg_min_W\n";
  for (std::size_t i = 0; i < g.soc.size(); ++i)
    for (std::size_t j = 0; j < g.temperature.size(); ++j)
      out << g.soc[i] << ',' << g.temperature[j] << ','
          << g.discharge_max(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) << ','
          << g.charge_min(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) << '\n';
}

// --- YAML ------------------------------------------------------------------

namespace {

/// Reads a YAML map while tracking which keys were consumed, so that
/// misspelt keys are reported instead of silently ignored.
class Section {
 public:
  Section(const YAML::Node& node, std::string path)
      : node_(node), path_(std::move(path)) {
    if (node_ && !node_.IsNull() && !node_.IsMap())
      throw ParseError(path_ + ": expected a mapping");
  }

  bool has(const std::string& key) const {
    return node_ && node_.IsMap() && node_[key];
  }

  double number(const std::string& key, double fallback) {
    seen_.insert(key);
    if (!has(key)) return fallback;
    return as_number(node_[key], path_ + "." + key);
  }

  bool flag(const std::string& key, bool fallback) {
    seen_.insert(key);
    if (!has(key)) return fallback;
    try {
      return node_[key].as<bool>();
    } catch (const YAML::Exception&) {
      throw ParseError(path_ + "." + key + ": expected true/false");
    }
  }

  YAML::Node child(const std::string& key) {
    seen_.insert(key);
    return has(key) ? node_[key] : YAML::Node();
  }

  std::string text(const std::string& key) {
    seen_.insert(key);
    try {
      return node_[key].as<std::string>();
    } catch (const YAML::Exception&) {
      throw ParseError(path_ + "." + key + ": expected a string");
    }
  }

  void finish() const {
    if (!node_ || !node_.IsMap()) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!seen_.count(key))
        throw ParseError(path_ + ": unknown key '" + key + "'");
    }
  }

  static double as_number(const YAML::Node& n, const std::string& where) {
    try {
      return n.as<double>();
    } catch (const YAML::Exception&) {
      throw ParseError(where + ": expected a number");
    }
  }

 private:
  YAML::Node node_;
  std::string path_;
  std::set<std::string> seen_;
};

std::vector<double> number_list(const YAML::Node& n, const std::string& where) {
  if (!n.IsSequence()) throw ParseError(where + ": expected a list");
  std::vector<double> out;
  for (std::size_t i = 0; i < n.size(); ++i)
    out.push_back(Section::as_number(n[i], idx(where, i)));
  return out;
}

Eigen::MatrixXd number_matrix(const YAML::Node& n, const std::string& where) {
  if (!n.IsSequence() || n.size() == 0)
    throw ParseError(where + ": expected a list of rows");
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < n.size(); ++i)
    rows.push_back(number_list(n[i], idx(where, i)));
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.front().size())
      throw ParseError(idx(where, i) + ": ragged matrix row");
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return m;
}

RoadProfile parse_road(const YAML::Node& node,
                       const std::filesystem::path& base_dir) {
  if (!node) throw ParseError("road: section missing");
  Section sec(node, "road");
  std::vector<RoadBreakpoint> pts;
  if (sec.has("csv")) {
    pts = read_road_csv(base_dir / sec.text("csv"));
  } else if (sec.has("breakpoints")) {
    const auto list = sec.child("breakpoints");
    if (!list.IsSequence()) throw ParseError("road.breakpoints: expected a list");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto row = number_list(list[i], idx("road.breakpoints", i));
      if (row.size() != 4)
        throw ParseError(idx("road.breakpoints", i) +
                         ": expected [s_m, alt_m, vmin_mps, vmax_mps]");
      pts.push_back({row[0], row[1], row[2], row[3]});
    }
  } else {
    throw ParseError("road: needs either 'csv' or 'breakpoints'");
  }
  sec.finish();
  return RoadProfile(std::move(pts));
}

std::vector<ChargerSpec> parse_chargers(const YAML::Node& node) {
  std::vector<ChargerSpec> out;
  if (!node || node.IsNull()) return out;
  if (!node.IsSequence()) throw ParseError("chargers: expected a list");
  for (std::size_t i = 0; i < node.size(); ++i) {
    Section sec(node[i], idx("chargers", i));
    ChargerSpec c;
    if (!sec.has("s_m")) throw ParseError(idx("chargers", i) + ".s_m: missing");
    c.s = sec.number("s_m", 0.0);
    c.p_grid_max = sec.number("p_grid_max_W", 150e3);
    if (sec.has("c_e_per_J") && sec.has("c_e_per_kWh"))
      throw ParseError(idx("chargers", i) +
                       ": give only one of c_e_per_J / c_e_per_kWh");
    c.c_e = sec.has("c_e_per_J")
                ? sec.number("c_e_per_J", 0.0)
                : sec.number("c_e_per_kWh", 5.0) / kJoulePerKwh;
    sec.number("c_e_per_J", 0.0);
    sec.number("c_e_per_kWh", 0.0);
    c.c_T = sec.number("c_T_per_s", 0.0);
    c.t_free = sec.number("t_free_s", 0.0);
    c.t_chg_max = sec.number("t_chg_max_s", 3600.0);
    sec.finish();
    out.push_back(c);
  }
  return out;
}

}  // namespace

Scenario parse_scenario(const std::string& text,
                        const std::filesystem::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ParseError(std::string("scenario: ") + e.what());
  }
  if (!root.IsMap()) throw ParseError("scenario: expected a mapping at top level");
  Section top(root, "scenario");
  const double version = top.number("schema_version", -1.0);
  if (version != 1.0)
    throw ParseError("schema_version: expected 1");

  Scenario scn;
  scn.road = parse_road(top.child("road"), base_dir);
  scn.chargers = parse_chargers(top.child("chargers"));

  auto& v = scn.vehicle;
  {
    Section sec(top.child("vehicle"), "vehicle");
    v.mass = sec.number("mass_kg", v.mass);
    v.frontal_area = sec.number("frontal_area_m2", v.frontal_area);
    v.drag_coeff = sec.number("drag_coeff", v.drag_coeff);
    v.roll_coeff = sec.number("roll_coeff", v.roll_coeff);
    v.air_density = sec.number("air_density_kg_m3", v.air_density);
    v.gravity = sec.number("gravity_m_s2", v.gravity);
    v.p_aux = sec.number("p_aux_W", v.p_aux);
    v.k0 = sec.number("k0_W", v.k0);
    v.k1 = sec.number("k1", v.k1);
    v.k2 = sec.number("k2_W_s2_m2", v.k2);
    v.p_base = sec.number("p_base_W", v.p_base);
    v.a_cap = sec.number("a_cap_m_s2", v.a_cap);
    v.p_em_max = sec.number("p_em_max_W", v.p_em_max);
    v.v_eps = sec.number("v_eps_mps", v.v_eps);
    sec.finish();
  }
  auto& b = scn.battery;
  b.limits = default_power_limit_grid();
  {
    Section sec(top.child("battery"), "battery");
    if (sec.has("capacity_C") && sec.has("capacity_Ah"))
      throw ParseError("battery: give only one of capacity_C / capacity_Ah");
    v.capacity = sec.has("capacity_C")
                     ? sec.number("capacity_C", v.capacity)
                     : sec.number("capacity_Ah", v.capacity / 3600.0) * 3600.0;
    sec.number("capacity_C", 0.0);
    sec.number("capacity_Ah", 0.0);
    b.u0 = sec.number("u0_V", b.u0);
    b.u1 = sec.number("u1_V", b.u1);
    b.r_ref = sec.number("r_ref_ohm", b.r_ref);
    b.t_ref = sec.number("t_ref_C", b.t_ref);
    b.k_r = sec.number("k_r_per_K", b.k_r);
    b.r_floor = sec.number("r_floor_ohm", b.r_floor);
    b.r_cap = sec.number("r_cap_ohm", b.r_cap);
    if (sec.has("power_limits_csv") && sec.has("power_limits"))
      throw ParseError("battery: give only one of power_limits_csv / power_limits");
    if (sec.has("power_limits_csv")) {
      b.limits = read_power_limit_csv(base_dir / sec.text("power_limits_csv"));
    } else if (sec.has("power_limits")) {
      Section grid(sec.child("power_limits"), "battery.power_limits");
      b.limits.soc = number_list(grid.child("soc"), "battery.power_limits.soc");
      b.limits.temperature =
          number_list(grid.child("T_b_C"), "battery.power_limits.T_b_C");
      b.limits.discharge_max = number_matrix(
          grid.child("P_dchg_max_W"), "battery.power_limits.P_dchg_max_W");
      b.limits.charge_min = number_matrix(grid.child("P_chg_min_W"),
                                          "battery.power_limits.P_chg_min_W");
      grid.finish();
    }
    sec.child("power_limits_csv");
    sec.child("power_limits");
    sec.finish();
  }
  {
    Section sec(top.child("thermal"), "thermal");
    v.cp_mb = sec.number("cp_mb_J_per_K", v.cp_mb);
    v.eta_hvch = sec.number("eta_hvch", v.eta_hvch);
    v.eta_hvac = sec.number("eta_hvac", v.eta_hvac);
    v.p_hvch_max = sec.number("p_hvch_max_W", v.p_hvch_max);
    v.p_hvac_max = sec.number("p_hvac_max_W", v.p_hvac_max);
    v.p_hvch_cabin = sec.number("p_hvch_cabin_W", v.p_hvch_cabin);
    v.gamma0 = sec.number("gamma0_W_per_K", v.gamma0);
    v.gamma1 = sec.number("gamma1_W_s_per_K_m", v.gamma1);
    v.eps_ed = sec.number("eps_ed", v.eps_ed);
    v.battery_thermal = sec.flag("battery_thermal", v.battery_thermal);
    sec.finish();
  }
  {
    Section sec(top.child("costs"), "costs");
    scn.costs.c_t_trip = sec.number("c_t_trip_per_s", scn.costs.c_t_trip);
    sec.finish();
  }
  auto& bc = scn.boundary;
  {
    Section sec(top.child("boundary"), "boundary");
    bc.t_b0 = sec.number("T_b0_C", bc.t_b0);
    bc.soc_0 = sec.number("soc_0", bc.soc_0);
    bc.v_0 = sec.number("v_0_mps", bc.v_0);
    bc.t_bf_min = sec.number("T_bf_min_C", bc.t_bf_min);
    bc.soc_f_min = sec.number("soc_f_min", bc.soc_f_min);
    bc.t_amb = sec.number("T_amb_C", bc.t_amb);
    bc.t_b_min = sec.number("T_b_min_C", bc.t_b_min);
    bc.t_b_max = sec.number("T_b_max_C", bc.t_b_max);
    bc.soc_min = sec.number("soc_min", bc.soc_min);
    bc.soc_max = sec.number("soc_max", bc.soc_max);
    sec.finish();
  }
  top.finish();
  validate(scn);
  return scn;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string() + ": cannot open");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), path.parent_path());
}

std::string serialize_scenario(const Scenario& scn) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "schema_version" << YAML::Value << 1;

  out << YAML::Key << "road" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "breakpoints" << YAML::Value << YAML::BeginSeq;
  for (const auto& p : scn.road.points())
    out << YAML::Flow << YAML::BeginSeq << p.s << p.altitude << p.v_min
        << p.v_max << YAML::EndSeq;
  out << YAML::EndSeq << YAML::EndMap;

  out << YAML::Key << "chargers" << YAML::Value << YAML::BeginSeq;
  for (const auto& c : scn.chargers) {
    out << YAML::BeginMap;
    out << YAML::Key << "s_m" << YAML::Value << c.s;
    out << YAML::Key << "p_grid_max_W" << YAML::Value << c.p_grid_max;
    out << YAML::Key << "c_e_per_J" << YAML::Value << c.c_e;
    out << YAML::Key << "c_T_per_s" << YAML::Value << c.c_T;
    out << YAML::Key << "t_free_s" << YAML::Value << c.t_free;
    out << YAML::Key << "t_chg_max_s" << YAML::Value << c.t_chg_max;
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;

  const auto& v = scn.vehicle;
  out << YAML::Key << "vehicle" << YAML::Value << YAML::BeginMap
      << YAML::Key << "mass_kg" << YAML::Value << v.mass
      << YAML::Key << "frontal_area_m2" << YAML::Value << v.frontal_area
      << YAML::Key << "drag_coeff" << YAML::Value << v.drag_coeff
      << YAML::Key << "roll_coeff" << YAML::Value << v.roll_coeff
      << YAML::Key << "air_density_kg_m3" << YAML::Value << v.air_density
      << YAML::Key << "gravity_m_s2" << YAML::Value << v.gravity
      << YAML::Key << "p_aux_W" << YAML::Value << v.p_aux
      << YAML::Key << "k0_W" << YAML::Value << v.k0
      << YAML::Key << "k1" << YAML::Value << v.k1
      << YAML::Key << "k2_W_s2_m2" << YAML::Value << v.k2
      << YAML::Key << "p_base_W" << YAML::Value << v.p_base
      << YAML::Key << "a_cap_m_s2" << YAML::Value << v.a_cap
      << YAML::Key << "p_em_max_W" << YAML::Value << v.p_em_max
      << YAML::Key << "v_eps_mps" << YAML::Value << v.v_eps
      << YAML::EndMap;

  const auto& b = scn.battery;
  auto matrix = [&](const Eigen::MatrixXd& m) {
    out << YAML::BeginSeq;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      out << YAML::Flow << YAML::BeginSeq;
      for (Eigen::Index j = 0; j < m.cols(); ++j) out << m(i, j);
      out << YAML::EndSeq;
    }
    out << YAML::EndSeq;
  };
  out << YAML::Key << "battery" << YAML::Value << YAML::BeginMap
      << YAML::Key << "capacity_C" << YAML::Value << v.capacity
      << YAML::Key << "u0_V" << YAML::Value << b.u0
      << YAML::Key << "u1_V" << YAML::Value << b.u1
      << YAML::Key << "r_ref_ohm" << YAML::Value << b.r_ref
      << YAML::Key << "t_ref_C" << YAML::Value << b.t_ref
      << YAML::Key << "k_r_per_K" << YAML::Value << b.k_r
      << YAML::Key << "r_floor_ohm" << YAML::Value << b.r_floor
      << YAML::Key << "r_cap_ohm" << YAML::Value << b.r_cap
      << YAML::Key << "power_limits" << YAML::Value << YAML::BeginMap
      << YAML::Key << "soc" << YAML::Value << YAML::Flow << b.limits.soc
      << YAML::Key << "T_b_C" << YAML::Value << YAML::Flow
      << b.limits.temperature << YAML::Key << "P_dchg_max_W" << YAML::Value;
  matrix(b.limits.discharge_max);
  out << YAML::Key << "P_chg_min_W" << YAML::Value;
  matrix(b.limits.charge_min);
  out << YAML::EndMap << YAML::EndMap;

  out << YAML::Key << "thermal" << YAML::Value << YAML::BeginMap
      << YAML::Key << "cp_mb_J_per_K" << YAML::Value << v.cp_mb
      << YAML::Key << "eta_hvch" << YAML::Value << v.eta_hvch
      << YAML::Key << "eta_hvac" << YAML::Value << v.eta_hvac
      << YAML::Key << "p_hvch_max_W" << YAML::Value << v.p_hvch_max
      << YAML::Key << "p_hvac_max_W" << YAML::Value << v.p_hvac_max
      << YAML::Key << "p_hvch_cabin_W" << YAML::Value << v.p_hvch_cabin
      << YAML::Key << "gamma0_W_per_K" << YAML::Value << v.gamma0
      << YAML::Key << "gamma1_W_s_per_K_m" << YAML::Value << v.gamma1
      << YAML::Key << "eps_ed" << YAML::Value << v.eps_ed
      << YAML::Key << "battery_thermal" << YAML::Value << v.battery_thermal
      << YAML::EndMap;

  out << YAML::Key << "costs" << YAML::Value << YAML::BeginMap
      << YAML::Key << "c_t_trip_per_s" << YAML::Value << scn.costs.c_t_trip
      << YAML::EndMap;

  const auto& bc = scn.boundary;
  out << YAML::Key << "boundary" << YAML::Value << YAML::BeginMap
      << YAML::Key << "T_b0_C" << YAML::Value << bc.t_b0
      << YAML::Key << "soc_0" << YAML::Value << bc.soc_0
      << YAML::Key << "v_0_mps" << YAML::Value << bc.v_0
      << YAML::Key << "T_bf_min_C" << YAML::Value << bc.t_bf_min
      << YAML::Key << "soc_f_min" << YAML::Value << bc.soc_f_min
      << YAML::Key << "T_amb_C" << YAML::Value << bc.t_amb
      << YAML::Key << "T_b_min_C" << YAML::Value << bc.t_b_min
      << YAML::Key << "T_b_max_C" << YAML::Value << bc.t_b_max
      << YAML::Key << "soc_min" << YAML::Value << bc.soc_min
      << YAML::Key << "soc_max" << YAML::Value << bc.soc_max
      << YAML::EndMap;

  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

// --- Resampling ------------------------------------------------------------

RoadGrid resample_road(const RoadProfile& profile, double ds,
                       std::span<const double> charger_positions) {
  if (profile.points().size() < 2)
    throw ValidationError("road.breakpoints",
                          "degenerate profile: fewer than 2 breakpoints");
  if (!(ds > 0.0)) throw ValidationError("ds", "sampling interval must be > 0");

  RoadGrid grid;
  const double s_f = profile.length();
  const double tol = 1e-9 * std::max(1.0, s_f);
  for (int k = 0;; ++k) {
    const double s = k * ds;
    if (s >= s_f - tol) break;
    grid.s.push_back(s);
  }
  grid.s.push_back(s_f);

  for (double s : grid.s) {
    grid.alpha.push_back(profile.gradient_at(s));
    grid.altitude.push_back(profile.altitude_at(s));
    grid.v_min.push_back(profile.v_min_at(s));
    grid.v_max.push_back(profile.v_max_at(s));
  }

  for (std::size_t i = 0; i < charger_positions.size(); ++i) {
    const double sc = charger_positions[i];
    const auto it = std::lower_bound(grid.s.begin(), grid.s.end(), sc);
    auto best = it == grid.s.end() ? grid.s.size() - 1
                                   : static_cast<std::size_t>(it - grid.s.begin());
    if (best > 0 && std::abs(grid.s[best - 1] - sc) <= std::abs(grid.s[best] - sc))
      --best;
    // Ties between two nodes go to the later one.
    if (best + 1 < grid.s.size() &&
        std::abs(grid.s[best + 1] - sc) == std::abs(grid.s[best] - sc))
      ++best;
    const double dist = std::abs(grid.s[best] - sc);
    const auto field = idx("chargers", i) + ".s_chg";
    if (dist > 0.5 * ds + tol)
      throw ValidationError(field, "no grid node within ds/2 of the charger");
    if (best == 0)
      throw ValidationError(field, "charger snaps onto the start node");
    if (!grid.charger_nodes.empty() &&
        static_cast<int>(best) <= grid.charger_nodes.back())
      throw ValidationError(field, "two chargers snap onto the same node");
    if (dist > tol) {
      std::ostringstream msg;
      msg << "charger " << i << " at " << sc << " m snapped to node " << best
          << " (" << grid.s[best] << " m)";
      grid.warnings.push_back(msg.str());
    }
    grid.charger_nodes.push_back(static_cast<int>(best));
  }
  return grid;
}

RoadGrid resample_road(const Scenario& scn, double ds) {
  std::vector<double> pos;
  for (const auto& c : scn.chargers) pos.push_back(c.s);
  return resample_road(scn.road, ds, pos);
}

}  // namespace ecoroute
