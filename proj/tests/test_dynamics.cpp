#include <cmath>
#include <complex>
#include <random>

#include <Eigen/Eigenvalues>

#include <gtest/gtest.h>

#include "ecoroute/dynamics.hpp"
#include "ecoroute/rk4.hpp"

using namespace ecoroute;

namespace {

struct Fixture {
  VehicleParams vehicle;
  BatteryMaps battery;
  Fixture() { battery.limits = default_power_limit_grid(); }
  ModelContext ctx(double t_amb = -10.0) const { return {vehicle, battery, t_amb}; }
};

}  // namespace

TEST(DrivingRhs, SteadyCruiseOnFlatRoad) {
  Fixture f;
  const DrivingState<double> x(300.0, 0.7, 10.0);
  const double a_t = accel_air(300.0, f.vehicle) + f.vehicle.gravity * f.vehicle.roll_coeff;
  const DrivingControl<double> u{0.0, 0.0, a_t, 2e4};
  EXPECT_NEAR(driving_rhs(x, u, 0.0, f.ctx())[kE], 0.0, 1e-15);
}

TEST(DrivingRhs, SocRateProbe) {
  Fixture f;
  const DrivingState<double> x(200.0, 0.6, 0.0);  // v = 20, U_oc = 360
  const DrivingControl<double> u{0.0, 0.0, 0.0, 72e3};
  EXPECT_NEAR(driving_rhs(x, u, 0.0, f.ctx())[kSocD], -1.388888888888889e-05, 1e-18);
}

TEST(DrivingRhs, TemperatureRateProbe) {
  Fixture f;
  f.vehicle.eps_ed = 0.0;
  const DrivingState<double> x(200.0, 0.6, -10.0);  // T_b == T_amb
  const DrivingControl<double> u{5000.0, 0.0, 0.0, 0.0};
  EXPECT_NEAR(driving_rhs(x, u, 0.0, f.ctx())[kTbD], 5.8e-4, 1e-16);
}

TEST(DrivingRhs, RejectsNonPositiveEnergy) {
  Fixture f;
  const DrivingControl<double> u{0.0, 0.0, 0.0, 0.0};
  EXPECT_THROW(driving_rhs(DrivingState<double>(0.0, 0.5, 0.0), u, 0.0, f.ctx()),
               std::domain_error);
  EXPECT_THROW(driving_rhs(DrivingState<double>(-1.0, 0.5, 0.0), u, 0.0, f.ctx()),
               std::domain_error);
}

TEST(ChargingRhs, SocRateProbe) {
  Fixture f;
  const ChargingState<double> x(0.6, -10.0);  // C_b U_oc = 2.592e8
  const ChargingControl<double> u{0.0, 0.0, 0.0, -126e3};
  EXPECT_NEAR(charging_rhs(x, u, 900.0, f.ctx())[kSocC], 0.4375, 1e-15);
}

TEST(ChargingRhs, EquilibriumAndLinearityInTchg) {
  Fixture f;
  const ChargingState<double> x(0.5, -10.0);
  const ChargingControl<double> off{0.0, 0.0, 0.0, 0.0};
  EXPECT_EQ(charging_rhs(x, off, 600.0, f.ctx()), ChargingState<double>::Zero());

  const ChargingState<double> y(0.4, -3.0);
  const ChargingControl<double> on{3000.0, 0.0, 8e4, -7e4};
  const auto a = charging_rhs(y, on, 500.0, f.ctx());
  const auto b = charging_rhs(y, on, 1000.0, f.ctx());
  EXPECT_NEAR(b[0], 2 * a[0], 1e-15);
  EXPECT_NEAR(b[1], 2 * a[1], 1e-15);
  EXPECT_THROW(charging_rhs(y, on, 0.0, f.ctx()), std::domain_error);
}

TEST(PowerBalance, LosslessChargingProbe) {
  Fixture f;
  f.battery.r_ref = 0.0;
  f.battery.r_floor = 0.0;
  const ChargingState<double> x(0.5, 0.0);
  auto r = [&](double pb) {
    return charging_power_balance(x, ChargingControl<double>{5000.0, 0.0, 1e4, pb}, f.ctx());
  };
  EXPECT_EQ(r(-4500.0), 0.0);
  EXPECT_NE(r(-4400.0), 0.0);
  EXPECT_NE(r(-4600.0), 0.0);
}

TEST(PowerBalance, DrivingWithNoLoads) {
  Fixture f;
  f.vehicle.k0 = 0.0;
  f.vehicle.k2 = 0.0;
  f.vehicle.p_aux = 0.0;
  f.vehicle.p_hvch_cabin = 0.0;
  f.battery.r_ref = 0.0;
  f.battery.r_floor = 0.0;
  const DrivingState<double> x(300.0, 0.5, 0.0);
  for (double pb : {-2e4, -1.0, 0.0, 3.0, 5e4}) {
    const DrivingControl<double> u{0.0, 0.0, 0.0, pb};
    EXPECT_EQ(driving_power_balance(x, u, f.ctx()), -pb);
  }
}

TEST(PowerBalance, QuadraticWithPositiveCurvature) {
  Fixture f;
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const DrivingState<double> x(100 + 500 * u(rng), 0.1 + 0.8 * u(rng), -20 + 60 * u(rng));
    const double pb = -1e5 + 2e5 * u(rng), h = 1e3;
    auto r = [&](double p) {
      return driving_power_balance(x, DrivingControl<double>{0.0, 0.0, 0.2, p}, f.ctx());
    };
    const auto el = battery_maps_eval(x[kSocD], x[kTbD], f.battery);
    const double second = (r(pb + h) - 2 * r(pb) + r(pb - h)) / (h * h);
    EXPECT_NEAR(second, 2 * el.r_b / (el.u_oc * el.u_oc), 1e-9);
    EXPECT_GT(second, 0.0);
  }
}

TEST(PowerBalance, TwoRealRootsAndPhysicalBranch) {
  Fixture f;
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const DrivingState<double> x(100 + 500 * u(rng), 0.1 + 0.8 * u(rng), -20 + 60 * u(rng));
    const double v = std::sqrt(2 * x[kE]);
    const double a_t = -1.0 + 2.0 * u(rng);
    const double d = driving_demand(v, a_t, 0.0, 0.0, f.vehicle);
    const auto el = battery_maps_eval(x[kSocD], x[kTbD], f.battery);
    const double pb = battery_power_for_demand(d, el.u_oc, el.r_b);
    const double other = el.u_oc * el.u_oc / el.r_b - pb;  // roots sum to U^2/R
    for (double root : {pb, other}) {
      const double r = driving_power_balance(x, DrivingControl<double>{0.0, 0.0, a_t, root}, f.ctx());
      EXPECT_NEAR(r, 0.0, 1e-6 * std::max(1.0, std::abs(root)));
    }
    EXPECT_LE(std::abs(pb), el.u_oc * el.u_oc / (2 * el.r_b));
    EXPECT_GT(std::abs(other), el.u_oc * el.u_oc / (2 * el.r_b));
  }
}

// Time-domain rates written out directly from the model functions, with
// state (v, soc, T_b): dv/dt, dsoc/dt, dT_b/dt.
TEST(DomainTransform, SpaceRhsTimesSpeedEqualsTimeRates) {
  Fixture f;
  std::mt19937_64 rng(18);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const double v = 5 + 35 * u(rng), soc = 0.05 + 0.9 * u(rng), tb = -30 + 80 * u(rng);
    const double alpha = -0.1 + 0.2 * u(rng), t_amb = -20 + 50 * u(rng);
    const DrivingControl<double> c{2000 * u(rng), 2000 * u(rng), -2 + 4 * u(rng), -5e4 + 1.5e5 * u(rng)};
    const auto ds = driving_rhs(DrivingState<double>(v * v / 2, soc, tb), c, alpha, f.ctx(t_amb));

    const auto& p = f.vehicle;
    const double dvdt = c.a_t - accel_air(v * v / 2, p) - accel_grade_roll(alpha, p);
    const double dsoc = -c.p_b / (p.capacity * open_circuit_voltage(soc, f.battery));
    const auto q = heat_rates(soc, tb, v, c.p_b, c.p_hvch, c.p_hvac,
                              propulsion_power(v, c.a_t, p).p_loss, t_amb, p, f.battery);
    const double dtb = q.total() / p.cp_mb;
    // dE/dt = v dv/dt, and dE/ds = dE/dt / v.
    EXPECT_NEAR(ds[kE] * v, v * dvdt, 1e-10 * std::abs(v * dvdt) + 1e-14);
    EXPECT_NEAR(ds[kSocD] * v, dsoc, 1e-10 * std::abs(dsoc));
    EXPECT_NEAR(ds[kTbD] * v, dtb, 1e-10 * std::abs(dtb));
  }
}

TEST(DomainTransform, TauRhsOverTchgEqualsTimeRates) {
  Fixture f;
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const double soc = 0.05 + 0.9 * u(rng), tb = -30 + 80 * u(rng), t_amb = -20 + 50 * u(rng);
    const double t_chg = 1 + 3000 * u(rng);
    const ChargingControl<double> c{7000 * u(rng), 5000 * u(rng), 1.5e5 * u(rng), -1.5e5 * u(rng)};
    const auto dtau = charging_rhs(ChargingState<double>(soc, tb), c, t_chg, f.ctx(t_amb));
    const auto& p = f.vehicle;
    const double dsoc = -c.p_b / (p.capacity * open_circuit_voltage(soc, f.battery));
    const auto q = heat_rates(soc, tb, 0.0, c.p_b, c.p_hvch, c.p_hvac, 0.0, t_amb, p, f.battery);
    EXPECT_NEAR(dtau[kSocC] / t_chg, dsoc, 1e-10 * std::abs(dsoc));
    EXPECT_NEAR(dtau[kTbC] / t_chg, q.total() / p.cp_mb, 1e-10 * std::abs(q.total() / p.cp_mb));
  }
}

TEST(Rk4, ExponentialDecayProbe) {
  using V = Eigen::Matrix<double, 1, 1>;
  const V x = rk4_step([](double, const V& y) { return V(-y); }, 0.0, V(1.0), 0.1);
  EXPECT_NEAR(x[0], 0.904837500, 1e-15);
  EXPECT_NEAR(x[0], 1 - 0.1 + 0.01 / 2 - 0.001 / 6 + 0.0001 / 24, 1e-15);
}

TEST(Rk4, ConstantRhsIsExact) {
  using V = Eigen::Vector2d;
  const V c(1.5, -2.25);
  const V x = rk4_step([&](double, const V&) { return c; }, 3.0, V(0.5, 4.0), 0.37);
  EXPECT_DOUBLE_EQ(x[0], 0.5 + 0.37 * 1.5);
  EXPECT_DOUBLE_EQ(x[1], 4.0 - 0.37 * 2.25);
}

TEST(Rk4, FourthOrderOnLinearSystem) {
  using V = Eigen::Vector2d;
  Eigen::Matrix2d A;
  A << -0.5, 1.0, -1.0, -0.2;
  const V x0(1.0, 0.0);
  const double tf = 4.0;
  // Exact solution via the matrix exponential of the 2x2 system.
  Eigen::EigenSolver<Eigen::Matrix2d> es(A);
  const Eigen::Vector2cd exact =
      es.eigenvectors() * (es.eigenvalues() * tf).array().exp().matrix().asDiagonal() *
      es.eigenvectors().inverse() * x0.cast<std::complex<double>>();
  std::vector<double> err;
  for (int n : {8, 16, 32, 64}) {
    V x = x0;
    const double h = tf / n;
    for (int k = 0; k < n; ++k)
      x = rk4_step([&](double, const V& y) { return V(A * y); }, k * h, x, h);
    err.push_back((x - exact.real()).norm());
  }
  for (std::size_t i = 1; i < err.size(); ++i)
    EXPECT_GE(std::log2(err[i - 1] / err[i]), 3.9);
}
