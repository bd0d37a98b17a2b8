#include "ecoroute/pareto.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace ecoroute {

namespace {

ParetoPoint make_point(double w, const TripSolution& sol) {
  ParetoPoint p;
  p.c_t_trip = w;
  p.trip_time = sol.trip_time();
  p.charging_time = sol.charging_time;
  p.energy_cost = sol.costs.energy_cost_total();
  p.status = sol.diagnostics.status;
  p.negative_weight = w < 0.0;
  p.solution = sol;
  return p;
}

CaseReport make_case(const std::string& label, const PlanResult& r) {
  CaseReport c;
  c.label = label;
  c.status = r.solution.diagnostics.status;
  c.trip_time = r.solution.trip_time();
  c.charging_time = r.solution.charging_time;
  c.energy_cost = r.solution.costs.energy_cost_total();
  c.total_cost = r.solution.costs.total;
  c.solution = r.solution;
  return c;
}

double ratio(double a, double b) { return b != 0.0 ? a / b : std::nan(""); }

}  // namespace

int ParetoFront::order_reversals(double rel_tol) const {
  std::vector<const ParetoPoint*> opt;
  for (const auto& p : points)
    if (p.optimal()) opt.push_back(&p);
  std::stable_sort(opt.begin(), opt.end(), [](const ParetoPoint* a, const ParetoPoint* b) {
    return a->trip_time < b->trip_time;
  });
  int n = 0;
  for (std::size_t i = 1; i < opt.size(); ++i) {
    const double prev = opt[i - 1]->energy_cost, cur = opt[i]->energy_cost;
    if (cur > prev + rel_tol * std::max(1.0, std::abs(prev))) ++n;
  }
  return n;
}

std::string ParetoFront::to_csv() const {
  std::ostringstream out;
  out << "c_t_trip,trip_time_s,chg_time_s,energy_cost,status\n";
  char buf[256];
  for (const auto& p : points) {
    std::snprintf(buf, sizeof buf, "%.10g,%.6f,%.6f,%.6f,%s%s\n", p.c_t_trip, p.trip_time,
                  p.charging_time, p.energy_cost, p.status.c_str(),
                  p.negative_weight ? "_negative_weight" : "");
    out << buf;
  }
  return out.str();
}

ParetoFront sweep(const Scenario& scn, const std::vector<double>& weights,
                  const SweepOptions& opts) {
  if (weights.empty()) throw std::invalid_argument("sweep: no weights");
  if (!std::is_sorted(weights.begin(), weights.end()))
    throw std::invalid_argument("sweep: weights must be sorted ascending");
  validate(scn);

  ParetoFront front;
  front.points.resize(weights.size());
  auto solve_one = [&](std::size_t i, const PlanState* warm) {
    Scenario s = scn;
    s.costs.c_t_trip = weights[i];
    auto r = plan_trip(s, opts.plan, warm);
    bool fallback = false;
    if (warm && !r.nlp.optimal()) {
      // Continuation can start in a poor basin when the optimum moves far
      // between weights; retry cold and keep the better outcome.
      auto cold = plan_trip(s, opts.plan);
      if (cold.nlp.optimal() || cold.nlp.kkt_residual < r.nlp.kkt_residual) {
        r = std::move(cold);
        fallback = true;
      }
    }
    front.points[i] = make_point(weights[i], r.solution);
    front.points[i].cold_fallback = fallback;
    return r.state;
  };

  if (opts.parallel <= 1) {
    PlanState state;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      const bool warm = opts.warm_start && i > 0;
      state = solve_one(i, warm ? &state : nullptr);
    }
    return front;
  }

  // Independent cold solves; each worker pulls the next index.
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i; (i = next++) < weights.size();) {
      try {
        solve_one(i, nullptr);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const int n = std::min<int>(opts.parallel, static_cast<int>(weights.size()));
  for (int t = 0; t < n; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  return front;
}

Scenario without_battery_thermal(Scenario scn) {
  scn.vehicle.battery_thermal = false;
  return scn;
}

PreconditioningReport preconditioning_study(const Scenario& scn, double c_t_trip,
                                            const PlanOptions& opts) {
  if (scn.chargers.empty())
    throw std::invalid_argument("preconditioning_study: scenario has no charger");
  Scenario base = scn;
  base.costs.c_t_trip = c_t_trip;
  PreconditioningReport rep;
  rep.c_t_trip = c_t_trip;
  rep.with_btm = make_case("case1_btm", plan_trip(base, opts));
  rep.without_btm = make_case("case2_no_btm", plan_trip(without_battery_thermal(base), opts));
  rep.charging_time_ratio = ratio(rep.without_btm.charging_time, rep.with_btm.charging_time);
  rep.trip_time_ratio = ratio(rep.without_btm.trip_time, rep.with_btm.trip_time);
  rep.energy_cost_ratio = ratio(rep.without_btm.energy_cost, rep.with_btm.energy_cost);
  return rep;
}

std::string PreconditioningReport::to_json() const {
  auto one = [](const CaseReport& c) {
    return nlohmann::json{{"label", c.label},
                          {"status", c.status},
                          {"trip_time_s", c.trip_time},
                          {"charging_time_s", c.charging_time},
                          {"energy_cost", c.energy_cost},
                          {"total_cost", c.total_cost},
                          {"summary", c.solution.summary()}};
  };
  nlohmann::json j;
  j["c_t_trip"] = c_t_trip;
  j["case1"] = one(with_btm);
  j["case2"] = one(without_btm);
  j["charging_time_ratio"] = charging_time_ratio;
  j["trip_time_ratio"] = trip_time_ratio;
  j["energy_cost_ratio"] = energy_cost_ratio;
  return j.dump(2) + "\n";
}

}  // namespace ecoroute
