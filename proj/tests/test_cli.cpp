// Runs the ecoroute binary and checks exit codes and outputs against the
// library API.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "ecoroute/pareto.hpp"
#include "ecoroute/planner.hpp"
#include "ecoroute/trip_solution.hpp"

namespace fs = std::filesystem;
using namespace ecoroute;

namespace {

const std::string kScenario = ECOROUTE_TEST_DATA "/flat_one_charger.yaml";

fs::path scratch() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "ecoroute_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int run(const std::string& args) {
  const std::string cmd = "ECOROUTE_LOG=quiet " ECOROUTE_CLI " " + args + " > " +
                          (scratch() / "stdout.txt").string() + " 2> " +
                          (scratch() / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string small_flags() { return " --ds 1000 --ntau 8"; }

PlanOptions small_options() {
  PlanOptions o;
  o.transcription.ds = 1000;
  o.transcription.n_tau = 8;
  return o;
}

TripSolution without_wall_time(TripSolution s) {
  s.diagnostics.wall_time_s = 0;
  return s;
}

}  // namespace

TEST(Cli, SolveMatchesLibraryAndPrintsSummary) {
  const auto out = scratch() / "solve";
  ASSERT_EQ(run("solve " + kScenario + " -o " + out.string() + small_flags()), 0);
  for (const char* f : {"solution.json", "drive_0.csv", "drive_1.csv", "charge_0.csv"})
    EXPECT_TRUE(fs::exists(out / f)) << f;
  const auto lib = plan_trip(load_scenario(kScenario), small_options());
  EXPECT_EQ(slurp(scratch() / "stdout.txt"), lib.solution.summary() + "\n");
  EXPECT_EQ(without_wall_time(load_trip_solution(out / "solution.json")),
            without_wall_time(lib.solution));
}

TEST(Cli, NoBtmMatchesStudyCaseTwo) {
  const auto out = scratch() / "nobtm";
  ASSERT_EQ(run("solve " + kScenario + " --no-btm -o " + out.string() + small_flags()), 0);
  const auto scn = load_scenario(kScenario);
  const auto rep = preconditioning_study(scn, scn.costs.c_t_trip, small_options());
  EXPECT_EQ(without_wall_time(load_trip_solution(out / "solution.json")),
            without_wall_time(rep.without_btm.solution));
}

TEST(Cli, InvalidScenarioExitsOneWithMessage) {
  const auto bad = scratch() / "bad.yaml";
  std::ofstream(bad) << "schema_version: 1\nroad:\n  breakpoints:\n    - [0, 0, 18, 30]\n";
  EXPECT_EQ(run("solve " + bad.string() + " -o " + (scratch() / "bad").string()), 1);
  EXPECT_NE(slurp(scratch() / "stderr.txt").find("error: "), std::string::npos);
  EXPECT_EQ(run("solve " + (scratch() / "missing.yaml").string()), 1);
  EXPECT_EQ(run(""), 1);
}

TEST(Cli, NonOptimalSolveExitsTwo) {
  const auto out = scratch() / "short";
  EXPECT_EQ(run("solve " + kScenario + " -o " + out.string() + small_flags() +
                " --kkt-tol 1e-30"),
            2);
}

TEST(Cli, ValidateAndPlot) {
  const auto out = scratch() / "vp";
  ASSERT_EQ(run("solve " + kScenario + " -o " + out.string() + small_flags()), 0);
  const auto sol = (out / "solution.json").string();
  EXPECT_EQ(run("validate " + sol + " " + kScenario + " -o " + (out / "val").string()), 0);
  EXPECT_NE(slurp(out / "val" / "validation.json").find("\"families\""), std::string::npos);
  EXPECT_TRUE(fs::exists(out / "val" / "trace.csv"));

  ASSERT_EQ(run("plot " + sol + " " + kScenario + " -o " + (out / "plots").string()), 0);
  for (const char* f : {"speed.svg", "soc.svg", "battery_temperature.svg", "powers.svg"})
    EXPECT_TRUE(fs::exists(out / "plots" / f)) << f;
  EXPECT_NE(slurp(out / "plots" / "speed.svg").find("Altitude [m]"), std::string::npos);
}

TEST(Cli, ValidateFailingSolutionExitsTwo) {
  auto sol = plan_trip(load_scenario(kScenario), small_options()).solution;
  for (auto& v : sol.segments[0].v) v *= 1.5;  // far above the speed limit
  for (auto& e : sol.segments[0].E) e *= 2.25;
  const auto out = scratch() / "fast";
  write_trip_solution(out, sol);
  EXPECT_EQ(run("validate " + (out / "solution.json").string() + " " + kScenario + " -o " +
                out.string()),
            2);
}

TEST(Cli, SweepWritesOneRowPerWeight) {
  const auto out = scratch() / "sweep";
  ASSERT_EQ(run("sweep " + kScenario + " --weights 0.01,0.02,0.04 -o " + out.string() +
                small_flags()),
            0);
  std::istringstream csv(slurp(out / "pareto.csv"));
  std::string line;
  int rows = -1;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 3);
  EXPECT_TRUE(fs::exists(out / "pareto.svg"));
  EXPECT_EQ(run("sweep " + kScenario + " --weights 0.02,0.01 -o " + out.string()), 1);
  EXPECT_EQ(run("sweep " + kScenario + " --weights 0.01,abc -o " + out.string()), 1);
}
