// ecoroute command-line front end.
//
// Exit codes: 0 optimal / validation passed, 2 non-optimal solve or failed
// constraint family, 1 usage, input or runtime error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ecoroute/pareto.hpp"
#include "ecoroute/planner.hpp"
#include "ecoroute/plot.hpp"
#include "ecoroute/scenario.hpp"
#include "ecoroute/trip_solution.hpp"
#include "ecoroute/validator.hpp"

namespace fs = std::filesystem;
using namespace ecoroute;

namespace {

// ECOROUTE_LOG: 0/quiet, 1/info (default), 2/debug (solver iterations).
int log_level() {
  const char* env = std::getenv("ECOROUTE_LOG");
  if (!env) return 1;
  const std::string v = env;
  if (v == "quiet" || v == "0") return 0;
  if (v == "debug" || v == "2") return 2;
  return 1;
}

std::ostream& info() {
  static std::ostringstream sink;
  if (log_level() >= 1) return std::cerr;
  sink.str({});
  return sink;
}

struct Common {
  std::string out = "out";
  double ds = TranscriptionOptions{}.ds;
  int n_tau = TranscriptionOptions{}.n_tau;
  double kkt_tol = SolverOptions{}.kkt_tol;
  double dt = 0.1;
  bool no_btm = false;
  long seed = 0;  // reserved: every solve is deterministic

  PlanOptions plan() const {
    PlanOptions o;
    o.transcription.ds = ds;
    o.transcription.n_tau = n_tau;
    o.solver.kkt_tol = kkt_tol;
    if (log_level() >= 2) o.solver.log = &std::cerr;
    return o;
  }
};

void add_out(CLI::App* cmd, Common& c) {
  cmd->add_option("-o,--out", c.out, "Output directory")->capture_default_str();
}

void add_plan_flags(CLI::App* cmd, Common& c) {
  cmd->add_option("--ds", c.ds, "Distance step, m")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--ntau", c.n_tau, "Nodes per charging phase")
      ->capture_default_str()
      ->check(CLI::Range(2, 100000));
  cmd->add_option("--kkt-tol", c.kkt_tol, "KKT tolerance")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_flag("--no-btm", c.no_btm, "Disable battery heating and cooling");
  cmd->add_option("--seed", c.seed, "Reserved; the solver is deterministic");
}

Scenario read_scenario(const std::string& path, bool no_btm) {
  auto scn = load_scenario(path);
  return no_btm ? without_battery_thermal(std::move(scn)) : scn;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

int cmd_solve(const std::string& scenario, const Common& c) {
  const auto scn = read_scenario(scenario, c.no_btm);
  info() << "solving " << scenario << '\n';
  const auto r = plan_trip(scn, c.plan());
  write_trip_solution(c.out, r.solution);
  const auto& d = r.solution.diagnostics;
  info() << "status " << d.status << ", kkt " << d.kkt_residual << ", " << d.outer_iterations
         << " outer iterations, " << d.wall_time_s << " s\n";
  std::cout << r.solution.summary() << '\n';
  return r.nlp.optimal() ? 0 : 2;
}

int cmd_validate(const std::string& solution, const std::string& scenario, const Common& c) {
  const auto scn = load_scenario(scenario);
  const auto sol = load_trip_solution(solution);
  const auto trace = simulate_time_domain(scn, sol, c.dt);
  const auto rep = check_constraints(trace, scn);
  write_text(fs::path(c.out) / "validation.json", to_json(rep));
  write_trace_csv(fs::path(c.out) / "trace.csv", trace);
  for (const auto& [name, fam] : rep.families)
    info() << (fam.pass ? "  pass " : "  FAIL ") << name << ' ' << fam.max_violation << '\n';
  std::cout << (rep.pass ? "pass" : "fail") << '\n';
  return rep.pass ? 0 : 2;
}

std::vector<double> parse_weights(const std::string& list) {
  std::vector<double> w;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    const double v = std::stod(item, &used);
    if (used != item.size()) throw std::invalid_argument("bad weight '" + item + "'");
    w.push_back(v);
  }
  return w;
}

int cmd_sweep(const std::string& scenario, const std::string& weights, int parallel,
              const Common& c) {
  const auto scn = read_scenario(scenario, c.no_btm);
  SweepOptions opts;
  opts.plan = c.plan();
  opts.parallel = parallel;
  const auto front = sweep(scn, parse_weights(weights), opts);
  const fs::path dir = c.out;
  write_text(dir / "pareto.csv", front.to_csv());

  PlotSeries pts{"optimal points"};
  for (const auto& p : front.points)
    if (p.optimal()) {
      pts.x.push_back(p.trip_time / 60.0);
      pts.y.push_back(p.energy_cost);
    }
  write_text(dir / "pareto.svg",
             render_svg(Chart{"Trip time vs charging cost", "Trip time [min]",
                              "Charging energy cost", "", {pts}}));

  bool all = true;
  for (const auto& p : front.points) {
    all = all && p.optimal();
    std::cout << p.c_t_trip << ' ' << p.solution.summary() << ' ' << p.status << '\n';
  }
  info() << front.order_reversals() << " order reversals\n";
  return all ? 0 : 2;
}

int cmd_study(const std::string& scenario, double weight, bool weight_set, const Common& c) {
  const auto scn = load_scenario(scenario);
  const double w = weight_set ? weight : scn.costs.c_t_trip;
  const auto rep = preconditioning_study(scn, w, c.plan());
  write_text(fs::path(c.out) / "study.json", rep.to_json());
  write_trip_solution(fs::path(c.out) / "case1", rep.with_btm.solution);
  write_trip_solution(fs::path(c.out) / "case2", rep.without_btm.solution);
  std::cout << "case1 " << rep.with_btm.solution.summary() << ' ' << rep.with_btm.status << '\n'
            << "case2 " << rep.without_btm.solution.summary() << ' ' << rep.without_btm.status
            << '\n'
            << "charging time ratio " << rep.charging_time_ratio << '\n';
  const bool ok = rep.with_btm.status == "optimal" && rep.without_btm.status == "optimal";
  return ok ? 0 : 2;
}

int cmd_plot(const std::string& solution, const std::string& scenario, const Common& c) {
  const auto sol = load_trip_solution(solution);
  Scenario scn;
  if (!scenario.empty()) scn = load_scenario(scenario);
  for (const auto& p : write_trip_plots(c.out, sol, scenario.empty() ? nullptr : &scn))
    std::cout << p.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BEV eco-driving, battery thermal management and charging optimizer"};
  app.require_subcommand(1);
  Common c;
  std::string scenario, solution, weights;
  int parallel = 1;
  double weight = 0.0;

  auto* solve = app.add_subcommand("solve", "Optimize a trip and write the solution");
  solve->add_option("scenario", scenario, "Scenario YAML")->required();
  add_out(solve, c);
  add_plan_flags(solve, c);

  auto* validate_cmd =
      app.add_subcommand("validate", "Replay a solution in the time domain and check it");
  validate_cmd->add_option("solution", solution, "solution.json")->required();
  validate_cmd->add_option("scenario", scenario, "Scenario YAML")->required();
  validate_cmd->add_option("--dt", c.dt, "Simulation step, s")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  add_out(validate_cmd, c);

  auto* sweep_cmd = app.add_subcommand("sweep", "Sweep the trip-time weight");
  sweep_cmd->add_option("scenario", scenario, "Scenario YAML")->required();
  sweep_cmd->add_option("--weights", weights, "Comma-separated ascending weights")->required();
  sweep_cmd->add_option("--parallel", parallel, "Independent cold solves on N threads")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  add_out(sweep_cmd, c);
  add_plan_flags(sweep_cmd, c);

  auto* study = app.add_subcommand("study", "Compare charging with and without battery heating");
  study->add_option("scenario", scenario, "Scenario YAML")->required();
  auto* wopt = study->add_option("--weight", weight, "Trip-time weight (default: scenario's)");
  add_out(study, c);
  add_plan_flags(study, c);

  auto* plot = app.add_subcommand("plot", "Render SVG panels of a solution");
  plot->add_option("solution", solution, "solution.json")->required();
  plot->add_option("scenario", scenario, "Scenario YAML, adds altitude and speed limits");
  add_out(plot, c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*solve) return cmd_solve(scenario, c);
    if (*validate_cmd) return cmd_validate(solution, scenario, c);
    if (*sweep_cmd) return cmd_sweep(scenario, weights, parallel, c);
    if (*study) {
      if (c.no_btm) throw std::invalid_argument("study always runs both cases; drop --no-btm");
      return cmd_study(scenario, weight, wopt->count() > 0, c);
    }
    if (*plot) return cmd_plot(solution, scenario, c);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
