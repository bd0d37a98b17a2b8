#include <cmath>

#include <gtest/gtest.h>
#include <json.hpp>

#include "ecoroute/lbfgsb.hpp"
#include "ecoroute/scalar.hpp"
#include "ecoroute/solver.hpp"
#include "ecoroute/transcription.hpp"

using namespace ecoroute;
using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::VectorXd;

namespace {

// min (z1-1)^2 + (z2-2)^2  s.t.  z1 + z2 = 1.
FunctionNlp equality_example() {
  FunctionNlp::Spec s;
  s.f = [](const VectorXd& z) { return std::pow(z[0] - 1, 2) + std::pow(z[1] - 2, 2); };
  s.grad = [](const VectorXd& z) { return VectorXd(Vector2d(2 * (z[0] - 1), 2 * (z[1] - 2))); };
  s.ceq = [](const VectorXd& z) { return VectorXd::Constant(1, z[0] + z[1] - 1); };
  s.jeq = [](const VectorXd&) { return MatrixXd::Ones(1, 2); };
  s.n_eq = 1;
  s.guess = Vector2d(3.0, -1.0);
  return FunctionNlp(s);
}

// min (z1-2)^2 + (z2-1)^2  s.t.  z1 + z2 <= 2.
FunctionNlp inequality_example() {
  FunctionNlp::Spec s;
  s.f = [](const VectorXd& z) { return std::pow(z[0] - 2, 2) + std::pow(z[1] - 1, 2); };
  s.grad = [](const VectorXd& z) { return VectorXd(Vector2d(2 * (z[0] - 2), 2 * (z[1] - 1))); };
  s.cin = [](const VectorXd& z) { return VectorXd::Constant(1, z[0] + z[1] - 2); };
  s.jin = [](const VectorXd&) { return MatrixXd::Ones(1, 2); };
  s.n_in = 1;
  s.guess = Vector2d(0.0, 0.0);
  return FunctionNlp(s);
}

// Constrained Rosenbrock with a scale factor c on z2: the unscaled problem is
// min (1-x)^2 + 100 (y - x^2)^2  s.t.  x^2 + y^2 <= 1.5, y = w / c.
FunctionNlp rosenbrock_disk(double c) {
  FunctionNlp::Spec s;
  s.f = [c](const VectorXd& z) {
    const double x = z[0], y = z[1] / c;
    return std::pow(1 - x, 2) + 100 * std::pow(y - x * x, 2);
  };
  s.grad = [c](const VectorXd& z) {
    const double x = z[0], y = z[1] / c;
    return VectorXd(Vector2d(-2 * (1 - x) - 400 * x * (y - x * x), 200 * (y - x * x) / c));
  };
  s.cin = [c](const VectorXd& z) {
    return VectorXd::Constant(1, z[0] * z[0] + std::pow(z[1] / c, 2) - 1.5);
  };
  s.jin = [c](const VectorXd& z) {
    MatrixXd j(1, 2);
    j << 2 * z[0], 2 * z[1] / (c * c);
    return j;
  };
  s.n_in = 1;
  s.lower = Vector2d(-2.0, -2.0 * c);
  s.upper = Vector2d(2.0, 2.0 * c);
  s.guess = Vector2d(-1.2, 1.0 * c);
  return FunctionNlp(s);
}

}  // namespace

TEST(Gradients, QuadraticMatchesClosedForm) {
  MatrixXd A(4, 4);
  A << 4, 1, 0, 2, 1, 3, -1, 0, 0, -1, 5, 1, 2, 0, 1, 6;
  const Eigen::Vector4d b(1.0, -2.0, 0.5, 3.0);
  const Eigen::Vector4d z(0.3, -1.1, 2.0, 0.7);
  Eigen::Matrix<AdScalar, 4, 1> za;
  for (int i = 0; i < 4; ++i) za[i] = ad_variable(z[i], i);
  AdScalar f(0.0);
  for (int i = 0; i < 4; ++i) {
    f += b[i] * za[i];
    for (int j = 0; j < 4; ++j) f += A(i, j) * za[i] * za[j];
  }
  const Eigen::Vector4d exact = (A + A.transpose()) * z + b;
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(f.derivatives()[i], exact[i], 1e-14 * 20);
}

TEST(KktResidual, UnconstrainedMinimumIsZero) {
  FunctionNlp::Spec s;
  s.f = [](const VectorXd& z) { return (z.array() - 1.5).square().sum(); };
  s.grad = [](const VectorXd& z) { return VectorXd(2 * (z.array() - 1.5)); };
  s.guess = VectorXd::Zero(3);
  FunctionNlp p(s);
  EXPECT_EQ(kkt_residual(p, VectorXd::Constant(3, 1.5), {}, {}), 0.0);
}

TEST(KktResidual, FeasibleNonStationaryEqualsProjectedGradient) {
  const auto p = equality_example();
  const Vector2d z(0.5, 0.5);  // feasible, lambda = 0
  const VectorXd lambda = VectorXd::Zero(1);
  NlpEval ev;
  p.evaluate(z, ev, true);
  const double pg = projected_gradient_norm(z, ev.grad, p.lower(), p.upper());
  EXPECT_DOUBLE_EQ(kkt_residual(p, z, lambda, {}), pg);
  EXPECT_DOUBLE_EQ(pg, 3.0);
}

TEST(KktResidual, HandSolvedEqualityExample) {
  const auto p = equality_example();
  EXPECT_LE(kkt_residual(p, Vector2d(0.0, 1.0), VectorXd::Constant(1, 2.0), {}), 1e-12);
}

TEST(Solve, EqualityExample) {
  const auto p = equality_example();
  const auto r = solve(p);
  ASSERT_TRUE(r.optimal()) << r.status;
  EXPECT_LE(r.kkt_residual, 1e-6);
  EXPECT_NEAR(r.z[0], 0.0, 1e-6);
  EXPECT_NEAR(r.z[1], 1.0, 1e-6);
  EXPECT_NEAR(r.lambda[0], 2.0, 1e-6);
}

TEST(Solve, InequalityExample) {
  const auto p = inequality_example();
  const auto r = solve(p);
  ASSERT_TRUE(r.optimal()) << r.status;
  EXPECT_NEAR(r.z[0], 1.5, 1e-6);
  EXPECT_NEAR(r.z[1], 0.5, 1e-6);
  EXPECT_NEAR(r.mu[0], 1.0, 1e-6);
}

TEST(Solve, BoxOnlySeparableQuadraticClipsOptimum) {
  const Eigen::Vector4d target(-3.0, 0.25, 2.0, 7.0);
  FunctionNlp::Spec s;
  s.f = [target](const VectorXd& z) { return (z - target).cwiseProduct(z - target).sum(); };
  s.grad = [target](const VectorXd& z) { return VectorXd(2 * (z - target)); };
  s.lower = VectorXd::Constant(4, -1.0);
  s.upper = VectorXd::Constant(4, 1.0);
  s.guess = VectorXd::Zero(4);
  FunctionNlp p(s);
  const auto r = solve(p);
  ASSERT_TRUE(r.optimal());
  const Eigen::Vector4d expected(-1.0, 0.25, 1.0, 1.0);
  EXPECT_LE((r.z - expected).lpNorm<Eigen::Infinity>(), 1e-9);
  // Bound multipliers: gradient of the Lagrangian at the active bounds.
  EXPECT_GT(r.bound_mult[0], 0.0);
  EXPECT_LT(r.bound_mult[2], 0.0);
  EXPECT_EQ(r.bound_mult[1], 0.0);
}

TEST(Solve, InfeasibleProblemIsReportedNotOptimal) {
  FunctionNlp::Spec s;
  s.f = [](const VectorXd& z) { return z.squaredNorm(); };
  s.grad = [](const VectorXd& z) { return VectorXd(2 * z); };
  s.ceq = [](const VectorXd& z) { return VectorXd(Vector2d(z[0] - 1, z[0] - 2)); };
  s.jeq = [](const VectorXd&) {
    MatrixXd j(2, 1);
    j << 1, 1;
    return j;
  };
  s.n_eq = 2;
  s.guess = VectorXd::Zero(1);
  FunctionNlp p(s);
  SolverOptions o;
  o.max_outer = 30;
  const auto r = solve(p, o);
  EXPECT_FALSE(r.optimal());
  EXPECT_TRUE(r.status == "infeasible_stationary" || r.status == "max_iter") << r.status;
}

TEST(Solve, DeterministicIterates) {
  const auto p = rosenbrock_disk(1.0);
  const auto a = solve(p);
  const auto b = solve(p);
  ASSERT_EQ(a.z.size(), b.z.size());
  EXPECT_EQ(a.z, b.z);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) EXPECT_EQ(a.history[i].f, b.history[i].f);
}

TEST(Solve, VariableRescalingInvariance) {
  const auto r1 = solve(rosenbrock_disk(1.0));
  const auto r2 = solve(rosenbrock_disk(64.0));
  ASSERT_TRUE(r1.optimal());
  ASSERT_TRUE(r2.optimal());
  EXPECT_NEAR(r1.z[0], r2.z[0], 1e-4);
  EXPECT_NEAR(r1.z[1], r2.z[1] / 64.0, 1e-4);
  // Known solution of the disk-constrained Rosenbrock lies on the circle.
  EXPECT_NEAR(r1.z[0] * r1.z[0] + r1.z[1] * r1.z[1], 1.5, 1e-5);
}

TEST(Solve, EqualityViolationMonotoneOverAcceptedIterations) {
  const auto r = solve(rosenbrock_disk(1.0));
  double last = std::numeric_limits<double>::infinity();
  for (const auto& it : r.history) {
    if (!it.accepted) continue;
    EXPECT_LE(it.ceq_inf, last);
    last = it.ceq_inf;
  }
}

TEST(Solve, LogAndDiagnostics) {
  std::ostringstream log;
  SolverOptions o;
  o.log = &log;
  const auto r = solve(equality_example(), o);
  std::istringstream in(log.str());
  std::string line;
  int lines = 0;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#') ++lines;
  EXPECT_EQ(lines, r.outer_iterations);
  const auto j = nlohmann::json::parse(diagnostics_json(r));
  EXPECT_EQ(j["status"], "optimal");
  EXPECT_EQ(j["history"].size(), r.history.size());
}

TEST(Solve, WarmStartFromSolutionIsImmediate) {
  const auto p = equality_example();
  const auto cold = solve(p);
  const auto warm = solve(p, {}, {cold.z, cold.lambda, cold.mu});
  ASSERT_TRUE(warm.optimal());
  EXPECT_LE(warm.outer_iterations, 1);
}

TEST(Solve, SmallEcoDrivingProblem) {
  const auto scn = parse_scenario(
      "schema_version: 1\nroad:\n  breakpoints:\n    - [0, 0, 18.0, 30.5]\n"
      "    - [4000, 30, 18.0, 30.5]\n    - [8000, 0, 18.0, 30.5]\n"
      "costs:\n  c_t_trip_per_s: 0.02\nboundary:\n  v_0_mps: 24\n  soc_f_min: 0.2\n");
  Transcription tr(scn);
  const auto sc = tr.scaled();
  const auto r = solve(*sc);
  ASSERT_TRUE(r.optimal()) << r.status << " kkt " << r.kkt_residual;
  const auto sol = tr.extract_solution(sc->to_unscaled(r.z));
  for (double v : sol.segments[0].v) {
    EXPECT_GE(v, 18.0 - 1e-6);
    EXPECT_LE(v, 30.5 + 1e-6);
  }
}

TEST(Lbfgsb, Rosenbrock) {
  auto f = [](const VectorXd& x, VectorXd& g) {
    g.resize(2);
    g[0] = -2 * (1 - x[0]) - 400 * x[0] * (x[1] - x[0] * x[0]);
    g[1] = 200 * (x[1] - x[0] * x[0]);
    return std::pow(1 - x[0], 2) + 100 * std::pow(x[1] - x[0] * x[0], 2);
  };
  const double inf = std::numeric_limits<double>::infinity();
  const auto r = lbfgsb_minimize(f, Vector2d(-1.2, 1.0), Vector2d(-inf, -inf),
                                 Vector2d(inf, inf));
  EXPECT_EQ(r.status, LbfgsbStatus::kConverged);
  EXPECT_NEAR(r.x[0], 1.0, 1e-6);
  EXPECT_NEAR(r.x[1], 1.0, 1e-6);

  // With x <= 0.5 the minimizer is (0.5, 0.25).
  const auto b = lbfgsb_minimize(f, Vector2d(-1.2, 1.0), Vector2d(-2, -2), Vector2d(0.5, 2));
  EXPECT_EQ(b.status, LbfgsbStatus::kConverged);
  EXPECT_NEAR(b.x[0], 0.5, 1e-9);
  EXPECT_NEAR(b.x[1], 0.25, 1e-7);
}

TEST(Lbfgsb, MemoryCarriesAcrossCalls) {
  const int n = 30;
  auto f = [n](const VectorXd& x, VectorXd& g) {
    g.resize(n);
    double v = 0;
    for (int i = 0; i < n; ++i) {
      const double w = 1.0 + i;
      v += 0.5 * w * x[i] * x[i] - x[i];
      g[i] = w * x[i] - 1.0;
    }
    return v;
  };
  const VectorXd lo = VectorXd::Constant(n, -10), hi = VectorXd::Constant(n, 10);
  LbfgsbOptions o;
  o.max_iterations = 5;
  LbfgsbMemory mem(n, o.memory);
  auto r = lbfgsb_minimize(f, VectorXd::Zero(n), lo, hi, o, &mem);
  EXPECT_GT(mem.size(), 0);
  o.max_iterations = 500;
  o.pg_tol = 1e-10;
  r = lbfgsb_minimize(f, r.x, lo, hi, o, &mem);
  EXPECT_EQ(r.status, LbfgsbStatus::kConverged);
  for (int i = 0; i < n; ++i) EXPECT_NEAR(r.x[i], 1.0 / (1.0 + i), 1e-9);
}

TEST(Lbfgsb, NonFiniteStartThrows) {
  auto f = [](const VectorXd&, VectorXd& g) {
    g = VectorXd::Zero(1);
    return std::nan("");
  };
  EXPECT_THROW(lbfgsb_minimize(f, VectorXd::Zero(1), VectorXd::Constant(1, -1),
                               VectorXd::Constant(1, 1)),
               std::domain_error);
}
