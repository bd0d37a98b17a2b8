#include "ecoroute/trip_solution.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace ecoroute {

using nlohmann::json;

double CostBreakdown::energy_cost_total() const {
  return std::accumulate(energy_cost.begin(), energy_cost.end(), 0.0);
}

double CostBreakdown::occupancy_cost_total() const {
  return std::accumulate(occupancy_cost.begin(), occupancy_cost.end(), 0.0);
}

namespace {

bool ends_with_charge(const TripSolution& sol) {
  return !sol.charges.empty() && sol.charges.size() >= sol.segments.size();
}

}  // namespace

double TripSolution::final_soc() const {
  if (ends_with_charge(*this)) return charges.back().soc.back();
  return segments.back().soc.back();
}

double TripSolution::final_t_b() const {
  if (ends_with_charge(*this)) return charges.back().t_b.back();
  return segments.back().t_b.back();
}

std::string TripSolution::summary() const {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%ld (%ld) %.1f",
                std::lround(trip_time() / 60.0), std::lround(charging_time / 60.0),
                costs.energy_cost_total() + costs.occupancy_cost_total());
  return buf;
}

// --- JSON ------------------------------------------------------------------

void to_json(json& j, const DrivingSegment& d) {
  j = json{{"s_m", d.s},        {"E_m2ps2", d.E},       {"v_mps", d.v},
           {"soc", d.soc},      {"T_b_C", d.t_b},       {"P_hvch_W", d.p_hvch},
           {"P_hvac_W", d.p_hvac}, {"a_t_mps2", d.a_t}, {"P_b_W", d.p_b}};
}

void from_json(const json& j, DrivingSegment& d) {
  j.at("s_m").get_to(d.s);
  j.at("E_m2ps2").get_to(d.E);
  j.at("v_mps").get_to(d.v);
  j.at("soc").get_to(d.soc);
  j.at("T_b_C").get_to(d.t_b);
  j.at("P_hvch_W").get_to(d.p_hvch);
  j.at("P_hvac_W").get_to(d.p_hvac);
  j.at("a_t_mps2").get_to(d.a_t);
  j.at("P_b_W").get_to(d.p_b);
}

void to_json(json& j, const ChargingPhase& c) {
  j = json{{"charger", c.charger}, {"s_m", c.s},          {"t_chg_s", c.t_chg},
           {"sigma_s", c.sigma},   {"tau", c.tau},        {"soc", c.soc},
           {"T_b_C", c.t_b},       {"P_hvch_W", c.p_hvch}, {"P_hvac_W", c.p_hvac},
           {"P_grid_W", c.p_grid}, {"P_b_W", c.p_b}};
}

void from_json(const json& j, ChargingPhase& c) {
  j.at("charger").get_to(c.charger);
  j.at("s_m").get_to(c.s);
  j.at("t_chg_s").get_to(c.t_chg);
  j.at("sigma_s").get_to(c.sigma);
  j.at("tau").get_to(c.tau);
  j.at("soc").get_to(c.soc);
  j.at("T_b_C").get_to(c.t_b);
  j.at("P_hvch_W").get_to(c.p_hvch);
  j.at("P_hvac_W").get_to(c.p_hvac);
  j.at("P_grid_W").get_to(c.p_grid);
  j.at("P_b_W").get_to(c.p_b);
}

std::string to_json(const TripSolution& sol) {
  json j;
  j["c_t_trip"] = sol.c_t_trip;
  j["summary"] = sol.summary();
  j["trip_time_s"] = sol.trip_time();
  j["driving_time_s"] = sol.driving_time;
  j["charging_time_s"] = sol.charging_time;
  j["final_soc"] = sol.final_soc();
  j["final_T_b_C"] = sol.final_t_b();
  j["costs"] = {{"trip_time_cost", sol.costs.trip_time_cost},
                {"energy_cost", sol.costs.energy_cost},
                {"occupancy_cost", sol.costs.occupancy_cost},
                {"energy_cost_total", sol.costs.energy_cost_total()},
                {"occupancy_cost_total", sol.costs.occupancy_cost_total()},
                {"total", sol.costs.total}};
  const auto& d = sol.diagnostics;
  j["diagnostics"] = {{"status", d.status},
                      {"kkt_residual", d.kkt_residual},
                      {"outer_iterations", d.outer_iterations},
                      {"inner_iterations", d.inner_iterations},
                      {"evaluations", d.evaluations},
                      {"wall_time_s", d.wall_time_s},
                      {"objective", d.objective}};
  j["segments"] = sol.segments;
  j["charges"] = sol.charges;
  return j.dump(2) + "\n";
}

TripSolution trip_solution_from_json(const std::string& text) {
  TripSolution sol;
  try {
    const json j = json::parse(text);
    j.at("c_t_trip").get_to(sol.c_t_trip);
    j.at("driving_time_s").get_to(sol.driving_time);
    j.at("charging_time_s").get_to(sol.charging_time);
    const auto& c = j.at("costs");
    c.at("trip_time_cost").get_to(sol.costs.trip_time_cost);
    c.at("energy_cost").get_to(sol.costs.energy_cost);
    c.at("occupancy_cost").get_to(sol.costs.occupancy_cost);
    c.at("total").get_to(sol.costs.total);
    const auto& d = j.at("diagnostics");
    d.at("status").get_to(sol.diagnostics.status);
    d.at("kkt_residual").get_to(sol.diagnostics.kkt_residual);
    d.at("outer_iterations").get_to(sol.diagnostics.outer_iterations);
    d.at("inner_iterations").get_to(sol.diagnostics.inner_iterations);
    d.at("evaluations").get_to(sol.diagnostics.evaluations);
    d.at("wall_time_s").get_to(sol.diagnostics.wall_time_s);
    d.at("objective").get_to(sol.diagnostics.objective);
    j.at("segments").get_to(sol.segments);
    j.at("charges").get_to(sol.charges);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("trip solution: ") + e.what());
  }
  if (sol.segments.empty())
    throw std::runtime_error("trip solution: no driving segments");
  return sol;
}

TripSolution load_trip_solution(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open");
  std::stringstream buf;
  buf << in.rdbuf();
  return trip_solution_from_json(buf.str());
}

std::vector<std::filesystem::path> write_trip_solution(
    const std::filesystem::path& dir, const TripSolution& sol) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  auto open = [&](const std::string& name) {
    written.push_back(dir / name);
    std::ofstream out(written.back());
    if (!out) throw std::runtime_error("cannot write " + written.back().string());
    out.precision(17);
    return out;
  };
  {
    auto out = open("solution.json");
    out << to_json(sol);
  }
  const char* cols = "v_mps,soc,T_b_C,P_b_W,P_hvch_W,P_hvac_W,P_grid_W,a_t_mps2\n";
  for (std::size_t i = 0; i < sol.segments.size(); ++i) {
    const auto& d = sol.segments[i];
    auto out = open("drive_" + std::to_string(i) + ".csv");
    out << "s_m," << cols;
    for (std::size_t k = 0; k < d.size(); ++k)
      out << d.s[k] << ',' << d.v[k] << ',' << d.soc[k] << ',' << d.t_b[k] << ','
          << d.p_b[k] << ',' << d.p_hvch[k] << ',' << d.p_hvac[k] << ",0,"
          << d.a_t[k] << '\n';
  }
  for (std::size_t i = 0; i < sol.charges.size(); ++i) {
    const auto& c = sol.charges[i];
    auto out = open("charge_" + std::to_string(i) + ".csv");
    out << "tau," << cols;
    for (std::size_t k = 0; k < c.size(); ++k)
      out << c.tau[k] << ",0," << c.soc[k] << ',' << c.t_b[k] << ',' << c.p_b[k]
          << ',' << c.p_hvch[k] << ',' << c.p_hvac[k] << ',' << c.p_grid[k]
          << ",0\n";
  }
  return written;
}

}  // namespace ecoroute
