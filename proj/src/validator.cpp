#include "ecoroute/validator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "ecoroute/models.hpp"

namespace ecoroute {

int SimTrace::mode_switches() const {
  int n = 0;
  for (std::size_t i = 1; i < samples.size(); ++i)
    if (samples[i].mode != samples[i - 1].mode) ++n;
  return n;
}

namespace {

// Driving state (s, v, soc, T_b); charging state uses soc and T_b only.
using State = std::array<double, 4>;

struct DriveControl {
  double a_t = 0.0, p_hvch = 0.0, p_hvac = 0.0;
};
struct ChargeControl {
  double p_hvch = 0.0, p_hvac = 0.0, p_grid = 0.0;
};

struct PowerSplit {
  double p_b = 0.0, loads = 0.0, joule = 0.0;
};

class Replay {
 public:
  Replay(const Scenario& scn, double dt) : scn_(scn), dt_(dt) {}

  PowerSplit drive_power(const State& x, const DriveControl& u) const {
    const auto& veh = scn_.vehicle;
    const auto el = battery_maps_eval(x[2], x[3], scn_.battery);
    const auto prop = propulsion_power(x[1], u.a_t, veh);
    PowerSplit p;
    p.loads = prop.p_prop + u.p_hvch + u.p_hvac + veh.p_hvch_cabin + veh.p_aux;
    p.p_b = battery_power_for_demand(p.loads, el.u_oc, el.r_b);
    p.joule = el.r_b * p.p_b * p.p_b / (el.u_oc * el.u_oc);
    return p;
  }

  PowerSplit charge_power(const State& x, const ChargeControl& u) const {
    const auto el = battery_maps_eval(x[2], x[3], scn_.battery);
    PowerSplit p;
    p.loads = u.p_hvch + u.p_hvac + scn_.vehicle.p_aux;
    p.p_b = battery_power_for_demand(p.loads - u.p_grid, el.u_oc, el.r_b);
    p.joule = el.r_b * p.p_b * p.p_b / (el.u_oc * el.u_oc);
    return p;
  }

  State drive_rate(const State& x, const DriveControl& u) const {
    const auto& veh = scn_.vehicle;
    const auto el = battery_maps_eval(x[2], x[3], scn_.battery);
    const double v = x[1];
    const auto prop = propulsion_power(v, u.a_t, veh);
    const double pb = drive_power(x, u).p_b;
    const auto q = heat_rates(x[2], x[3], v, pb, u.p_hvch, u.p_hvac, prop.p_loss,
                              scn_.boundary.t_amb, veh, scn_.battery);
    const double alpha = scn_.road.gradient_at(x[0]);
    return {v, u.a_t - accel_air(0.5 * v * v, veh) - accel_grade_roll(alpha, veh),
            -pb / (veh.capacity * el.u_oc), q.total() / veh.cp_mb};
  }

  State charge_rate(const State& x, const ChargeControl& u) const {
    const auto& veh = scn_.vehicle;
    const auto el = battery_maps_eval(x[2], x[3], scn_.battery);
    const double pb = charge_power(x, u).p_b;
    const auto q = heat_rates(x[2], x[3], 0.0, pb, u.p_hvch, u.p_hvac, 0.0,
                              scn_.boundary.t_amb, veh, scn_.battery);
    return {0.0, 0.0, -pb / (veh.capacity * el.u_oc), q.total() / veh.cp_mb};
  }

  template <typename Rate>
  static State rk4(const State& x, double h, Rate&& f) {
    auto axpy = [](const State& a, double c, const State& b) {
      State r;
      for (int i = 0; i < 4; ++i) r[i] = a[i] + c * b[i];
      return r;
    };
    const State k1 = f(x);
    const State k2 = f(axpy(x, 0.5 * h, k1));
    const State k3 = f(axpy(x, 0.5 * h, k2));
    const State k4 = f(axpy(x, h, k3));
    State r;
    for (int i = 0; i < 4; ++i) r[i] = x[i] + h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
    return r;
  }

  void record_drive(double t, const State& x, const DriveControl& u) {
    const auto p = drive_power(x, u);
    SimSample smp;
    smp.t = t;
    smp.s = x[0];
    smp.v = x[1];
    smp.soc = x[2];
    smp.t_b = x[3];
    smp.p_b = p.p_b;
    smp.mode = SimMode::kDriving;
    smp.a_t = u.a_t;
    smp.p_hvch = u.p_hvch;
    smp.p_hvac = u.p_hvac;
    smp.p_loads = p.loads;
    smp.p_joule = p.joule;
    push(smp);
  }

  void record_charge(double t, const State& x, const ChargeControl& u, int charger) {
    const auto p = charge_power(x, u);
    SimSample smp;
    smp.t = t;
    smp.s = x[0];
    smp.soc = x[2];
    smp.t_b = x[3];
    smp.p_b = p.p_b;
    smp.p_grid = u.p_grid;
    smp.mode = SimMode::kCharging;
    smp.p_hvch = u.p_hvch;
    smp.p_hvac = u.p_hvac;
    smp.p_loads = p.loads;
    smp.p_joule = p.joule;
    smp.charger = charger;
    push(smp);
  }

  void push(const SimSample& smp) {
    for (double v : {smp.s, smp.v, smp.soc, smp.t_b, smp.p_b})
      if (!std::isfinite(v)) throw std::domain_error("simulate_time_domain: non-finite state");
    trace.samples.push_back(smp);
  }

  // Integrates one driving segment starting from x (s and v are taken from
  // the segment's first node).
  void drive(const DrivingSegment& seg, State& x, double& t) {
    const std::size_t n = seg.size();
    if (n < 2) throw std::out_of_range("simulate_time_domain: segment with fewer than 2 nodes");
    x[0] = seg.s[0];
    x[1] = seg.v[0];
    auto control = [&](std::size_t k) {
      return DriveControl{seg.a_t[k], seg.p_hvch[k], seg.p_hvac[k]};
    };
    record_drive(t, x, control(0));
    for (std::size_t k = 0; k + 1 < n; ++k) {
      const DriveControl u = control(k);
      const double s_end = seg.s[k + 1];
      auto rate = [&](const State& y) { return drive_rate(y, u); };
      while (x[0] < s_end) {
        if (!(x[1] > 0.1)) throw std::domain_error("simulate_time_domain: vehicle stalled");
        State next = rk4(x, dt_, rate);
        double h = dt_;
        if (next[0] >= s_end) {
          // Shorten the step so that it ends on the node (Newton on h).
          h = (s_end - x[0]) / x[1];
          for (int it = 0; it < 20; ++it) {
            next = rk4(x, h, rate);
            const double err = next[0] - s_end;
            if (std::abs(err) <= 1e-10 * std::max(1.0, s_end)) break;
            h -= err / next[1];
          }
          next[0] = s_end;
        }
        x = next;
        t += h;
        const bool at_node = x[0] >= s_end;
        record_drive(t, x, at_node ? control(k + 1) : u);
      }
    }
  }

  void charge(const ChargingPhase& ph, State& x, double& t) {
    const std::size_t n = ph.size();
    if (n < 2) throw std::out_of_range("simulate_time_domain: charging phase with fewer than 2 nodes");
    if (!(ph.t_chg > 0.0)) throw std::domain_error("simulate_time_domain: non-positive charging time");
    x[1] = 0.0;
    SimEvent ev;
    ev.charger = ph.charger;
    ev.arrival = t;
    auto control = [&](std::size_t j) {
      return ChargeControl{ph.p_hvch[j], ph.p_hvac[j], ph.p_grid[j]};
    };
    for (std::size_t j = 0; j + 1 < n; ++j) {
      const ChargeControl u = control(j);
      auto rate = [&](const State& y) { return charge_rate(y, u); };
      const double duration = (ph.tau[j + 1] - ph.tau[j]) * ph.t_chg;
      const int steps = std::max(1, static_cast<int>(std::ceil(duration / dt_ - 1e-9)));
      const double h = duration / steps;
      const double t0 = t;
      for (int i = 1; i <= steps; ++i) {
        x = rk4(x, h, rate);
        t = t0 + i * h;
        record_charge(t, x, i == steps ? control(j + 1) : u, ph.charger);
      }
    }
    ev.departure = t;
    trace.events.push_back(ev);
  }

  SimTrace trace;

 private:
  const Scenario& scn_;
  double dt_;
};

// Trapezoid over consecutive samples. An interval whose end points differ in
// mode was integrated under the right sample's mode; its right value is used.
template <typename Get, typename Keep>
double integrate(const SimTrace& tr, Get&& get, Keep&& keep) {
  double acc = 0.0;
  for (std::size_t i = 1; i < tr.samples.size(); ++i) {
    const auto& a = tr.samples[i - 1];
    const auto& b = tr.samples[i];
    if (!keep(b)) continue;
    const double fa = a.mode == b.mode ? get(a) : get(b);
    acc += 0.5 * (b.t - a.t) * (fa + get(b));
  }
  return acc;
}

double range_violation(double x, double lo, double hi, double scale) {
  return std::max({0.0, x - hi, lo - x}) / scale;
}

}  // namespace

SimTrace simulate_time_domain(const Scenario& scn, const TripSolution& sol, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("simulate_time_domain: dt must be positive");
  validate(scn);
  if (sol.segments.empty()) throw std::out_of_range("simulate_time_domain: no driving segment");
  if (sol.charges.size() > sol.segments.size() ||
      sol.charges.size() + 1 < sol.segments.size())
    throw std::out_of_range("simulate_time_domain: segments and charges do not alternate");
  if (std::abs(sol.segments.back().s.back() - scn.road.length()) > 1e-6 &&
      sol.charges.size() < sol.segments.size())
    throw std::out_of_range("simulate_time_domain: controls end before the route");

  Replay rp(scn, dt);
  State x{0.0, 0.0, sol.segments[0].soc[0], sol.segments[0].t_b[0]};
  double t = 0.0;
  for (std::size_t i = 0; i < sol.segments.size(); ++i) {
    rp.drive(sol.segments[i], x, t);
    if (i < sol.charges.size()) rp.charge(sol.charges[i], x, t);
  }
  return std::move(rp.trace);
}

CostBreakdown cost_accounting(const SimTrace& trace, const Scenario& scn, double c_t_trip) {
  CostBreakdown c;
  c.energy_cost.assign(scn.chargers.size(), 0.0);
  c.occupancy_cost.assign(scn.chargers.size(), 0.0);
  for (std::size_t k = 0; k < scn.chargers.size(); ++k) {
    const int ci = static_cast<int>(k);
    const double grid = integrate(
        trace, [](const SimSample& s) { return s.p_grid; },
        [ci](const SimSample& s) { return s.mode == SimMode::kCharging && s.charger == ci; });
    c.energy_cost[k] = scn.chargers[k].c_e * grid;
  }
  for (const auto& ev : trace.events) {
    const auto& ch = scn.chargers.at(ev.charger);
    c.occupancy_cost[ev.charger] += ch.c_T * std::max(0.0, ev.departure - ev.arrival - ch.t_free);
  }
  c.trip_time_cost = c_t_trip * trace.trip_time();
  c.total = c.trip_time_cost + c.energy_cost_total() + c.occupancy_cost_total();
  return c;
}

ValidationReport check_constraints(const SimTrace& trace, const Scenario& scn, double tolerance) {
  if (trace.samples.empty()) throw std::invalid_argument("check_constraints: empty trace");
  validate(scn);
  const auto& veh = scn.vehicle;
  const auto& bc = scn.boundary;
  ValidationReport rep;
  rep.tolerance = tolerance;
  for (const char* f : {"speed", "acceleration", "battery_power", "soc", "battery_temperature",
                        "thermal_controls", "grid_power", "charging_time", "terminal"})
    rep.families[f] = {};
  auto flag = [&](const char* family, double v) {
    auto& r = rep.families[family];
    r.max_violation = std::max(r.max_violation, v);
  };

  for (const auto& smp : trace.samples) {
    const bool driving = smp.mode == SimMode::kDriving;
    const auto lim = power_limits(smp.soc, smp.t_b, scn.battery);
    const double prange = lim.dchg_max - lim.chg_min;
    const double p_hi = driving ? lim.dchg_max : std::min(lim.dchg_max, 0.0);
    flag("battery_power", range_violation(smp.p_b, lim.chg_min, p_hi, prange));
    flag("soc", range_violation(smp.soc, bc.soc_min, bc.soc_max, bc.soc_max - bc.soc_min));
    flag("battery_temperature",
         range_violation(smp.t_b, bc.t_b_min, bc.t_b_max, bc.t_b_max - bc.t_b_min));
    const double hvch_max =
        driving ? veh.hvch_battery_max_driving() : veh.hvch_battery_max_charging();
    flag("thermal_controls", range_violation(smp.p_hvch, 0.0, hvch_max, veh.p_hvch_max));
    flag("thermal_controls",
         range_violation(smp.p_hvac, 0.0, veh.hvac_battery_max(), veh.p_hvac_max));
    if (driving) {
      const double vmin = scn.road.v_min_at(smp.s), vmax = scn.road.v_max_at(smp.s);
      flag("speed", range_violation(smp.v, vmin, vmax, vmax - vmin));
      const auto acc = accel_limits(0.5 * smp.v * smp.v, veh);
      flag("acceleration", range_violation(smp.a_t, acc.a_min, acc.a_max, acc.a_max - acc.a_min));
    } else {
      const double gmax = scn.chargers.at(smp.charger).p_grid_max;
      flag("grid_power", range_violation(smp.p_grid, 0.0, gmax, gmax));
    }
  }
  for (const auto& ev : trace.events) {
    const double tmax = scn.chargers.at(ev.charger).t_chg_max;
    flag("charging_time", std::max(0.0, ev.departure - ev.arrival - tmax) / tmax);
    rep.charging_time += ev.departure - ev.arrival;
  }
  const auto& last = trace.samples.back();
  rep.final_soc = last.soc;
  rep.final_t_b = last.t_b;
  flag("terminal", std::max(0.0, bc.soc_f_min - last.soc) / (bc.soc_max - bc.soc_min));
  flag("terminal", std::max(0.0, bc.t_bf_min - last.t_b) / (bc.t_b_max - bc.t_b_min));
  if (std::abs(last.s - scn.road.length()) > 1e-6) flag("terminal", 1.0);

  rep.pass = true;
  for (auto& [name, r] : rep.families) {
    r.pass = r.max_violation <= tolerance;
    rep.pass = rep.pass && r.pass;
  }
  rep.trip_time = trace.trip_time();
  rep.costs = cost_accounting(trace, scn, scn.costs.c_t_trip);

  auto all = [](const SimSample&) { return true; };
  rep.battery_energy_out = integrate(trace, [](const SimSample& s) { return s.p_b; }, all);
  rep.load_energy = integrate(trace, [](const SimSample& s) { return s.p_loads; }, all);
  rep.joule_energy = integrate(trace, [](const SimSample& s) { return s.p_joule; }, all);
  rep.grid_energy = integrate(trace, [](const SimSample& s) { return s.p_grid; }, all);
  // U_oc is affine in soc, so the midpoint rule is exact per step.
  for (std::size_t i = 1; i < trace.samples.size(); ++i) {
    const auto& a = trace.samples[i - 1];
    const auto& b = trace.samples[i];
    const double u_mid = open_circuit_voltage(0.5 * (a.soc + b.soc), scn.battery);
    rep.chemical_energy += veh.capacity * u_mid * (a.soc - b.soc);
  }
  rep.battery_throughput = integrate(trace, [](const SimSample& s) { return std::abs(s.p_b); }, all);
  // Net battery energy can be near zero when a charge restores the start
  // state, so errors are relative to the throughput.
  const double ref = std::max(rep.battery_throughput, 1.0);
  rep.energy_balance_rel_error =
      std::max(std::abs(rep.battery_energy_out -
                        (rep.load_energy + rep.joule_energy - rep.grid_energy)),
               std::abs(rep.battery_energy_out - rep.chemical_energy)) /
      ref;
  return rep;
}

std::string to_json(const ValidationReport& r) {
  nlohmann::json j;
  j["tolerance"] = r.tolerance;
  j["pass"] = r.pass;
  for (const auto& [name, f] : r.families)
    j["families"][name] = {{"max_violation", f.max_violation}, {"pass", f.pass}};
  j["trip_time_s"] = r.trip_time;
  j["charging_time_s"] = r.charging_time;
  j["final_soc"] = r.final_soc;
  j["final_T_b_C"] = r.final_t_b;
  j["costs"] = {{"trip_time", r.costs.trip_time_cost},
                {"energy", r.costs.energy_cost},
                {"occupancy", r.costs.occupancy_cost},
                {"total", r.costs.total}};
  j["energy_J"] = {{"battery_out", r.battery_energy_out}, {"loads", r.load_energy},
                   {"joule", r.joule_energy},            {"grid", r.grid_energy},
                   {"chemical", r.chemical_energy},      {"throughput", r.battery_throughput},
                   {"balance_rel_error", r.energy_balance_rel_error}};
  return j.dump(2) + "\n";
}

void write_trace_csv(const std::filesystem::path& path, const SimTrace& trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "t_s,s_m,v_mps,soc,T_b_C,P_b_W,P_grid_W,mode\n";
  out.precision(10);
  for (const auto& s : trace.samples)
    out << s.t << ',' << s.s << ',' << s.v << ',' << s.soc << ',' << s.t_b << ',' << s.p_b << ','
        << s.p_grid << ',' << (s.mode == SimMode::kDriving ? "drive" : "charge") << '\n';
}

}  // namespace ecoroute
