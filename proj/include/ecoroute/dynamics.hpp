#pragma once

// Per-mode right-hand sides in the transformed independent variables:
// distance s while driving, normalized time tau = t / t_chg while charging.

#include <cmath>
#include <stdexcept>

#include <Eigen/Core>

#include "ecoroute/models.hpp"

namespace ecoroute {

/// x_drv = (E, soc, T_b); E is kinetic energy per unit mass.
template <typename T>
using DrivingState = Eigen::Matrix<T, 3, 1>;
/// x_chg = (soc, T_b).
template <typename T>
using ChargingState = Eigen::Matrix<T, 2, 1>;

enum DrivingIndex { kE = 0, kSocD = 1, kTbD = 2 };
enum ChargingIndex { kSocC = 0, kTbC = 1 };

template <typename T>
struct DrivingControl {
  T p_hvch;  // W, battery share of the HVCH
  T p_hvac;  // W
  T a_t;     // m/s^2, traction acceleration
  T p_b;     // W, battery terminal power (algebraic)
};

template <typename T>
struct ChargingControl {
  T p_hvch;
  T p_hvac;
  T p_grid;  // W drawn from the charger
  T p_b;     // W, <= 0 while charging
};

/// Everything a mode needs besides state and control.
struct ModelContext {
  const VehicleParams& vehicle;
  const BatteryMaps& battery;
  double t_amb;
};

/// dx/ds while driving at road gradient `alpha`. Throws std::domain_error
/// for E <= 0, where the 1/v terms are undefined.
template <typename T>
DrivingState<T> driving_rhs(const DrivingState<T>& x,
                            const DrivingControl<T>& u, const T& alpha,
                            const ModelContext& ctx) {
  using std::sqrt;
  if (!(value_of(x[kE]) > 0.0))
    throw std::domain_error("driving_rhs: kinetic energy must be positive");
  const auto& p = ctx.vehicle;
  const T v = sqrt(2.0 * x[kE]);
  const auto el = battery_maps_eval(x[kSocD], x[kTbD], ctx.battery);
  const auto prop = propulsion_power(v, u.a_t, p);
  const auto q = heat_rates(x[kSocD], x[kTbD], v, u.p_b, u.p_hvch, u.p_hvac,
                            prop.p_loss, ctx.t_amb, p, ctx.battery);
  DrivingState<T> dx;
  dx[kE] = u.a_t - accel_air(x[kE], p) - accel_grade_roll(alpha, p);
  dx[kSocD] = -u.p_b / (p.capacity * el.u_oc * v);
  dx[kTbD] = q.total() / (p.cp_mb * v);
  return dx;
}

/// dx/dtau while parked at a charger for t_chg seconds.
template <typename T>
ChargingState<T> charging_rhs(const ChargingState<T>& x,
                              const ChargingControl<T>& u, const T& t_chg,
                              const ModelContext& ctx) {
  if (!(value_of(t_chg) > 0.0))
    throw std::domain_error("charging_rhs: t_chg must be positive");
  const auto& p = ctx.vehicle;
  const auto el = battery_maps_eval(x[kSocC], x[kTbC], ctx.battery);
  const T zero(0.0);
  const auto q = heat_rates(x[kSocC], x[kTbC], zero, u.p_b, u.p_hvch,
                            u.p_hvac, zero, ctx.t_amb, p, ctx.battery);
  ChargingState<T> dx;
  dx[kSocC] = -t_chg * u.p_b / (p.capacity * el.u_oc);
  dx[kTbC] = t_chg * q.total() / p.cp_mb;
  return dx;
}

/// Electrical demand on the battery while driving at speed v (W).
template <typename T>
T driving_demand(const T& v, const T& a_t, const T& p_hvch, const T& p_hvac,
                 const VehicleParams& p) {
  return propulsion_power(v, a_t, p).p_prop + p_hvch + p_hvac +
         p.p_hvch_cabin + p.p_aux;
}

/// Net electrical demand while charging (negative when the grid feeds in).
template <typename T>
T charging_demand(const T& p_hvch, const T& p_hvac, const T& p_grid,
                  const VehicleParams& p) {
  return p_hvch + p_hvac + p.p_aux - p_grid;
}

/// Power-balance residual while driving; zero on feasible points.
template <typename T>
T driving_power_balance(const DrivingState<T>& x, const DrivingControl<T>& u,
                        const ModelContext& ctx) {
  using std::sqrt;
  const T v = sqrt(2.0 * x[kE]);
  const auto el = battery_maps_eval(x[kSocD], x[kTbD], ctx.battery);
  return el.r_b * u.p_b * u.p_b / (el.u_oc * el.u_oc) +
         driving_demand(v, u.a_t, u.p_hvch, u.p_hvac, ctx.vehicle) - u.p_b;
}

/// Power-balance residual while charging.
template <typename T>
T charging_power_balance(const ChargingState<T>& x,
                         const ChargingControl<T>& u,
                         const ModelContext& ctx) {
  const auto el = battery_maps_eval(x[kSocC], x[kTbC], ctx.battery);
  return el.r_b * u.p_b * u.p_b / (el.u_oc * el.u_oc) +
         charging_demand(u.p_hvch, u.p_hvac, u.p_grid, ctx.vehicle) - u.p_b;
}

}  // namespace ecoroute
