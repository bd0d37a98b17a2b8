#pragma once

// Physical model functions. Every function is templated on the scalar type so
// the same code serves plain evaluation and forward-mode differentiation.

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "ecoroute/scalar.hpp"
#include "ecoroute/scenario.hpp"

namespace ecoroute {

/// Aerodynamic deceleration c_a * E, with E = v^2 / 2.
template <typename T>
T accel_air(const T& E, const VehicleParams& p) {
  return p.air_coefficient() * E;
}

/// Grade plus rolling deceleration g (sin a + c_r cos a).
template <typename T>
T accel_grade_roll(const T& alpha, const VehicleParams& p) {
  using std::cos;
  using std::sin;
  return p.gravity * (sin(alpha) + p.roll_coeff * cos(alpha));
}

template <typename T>
struct Electrical {
  T u_oc;  // V
  T r_b;   // ohm
};

template <typename T>
T open_circuit_voltage(const T& soc, const BatteryMaps& maps) {
  return maps.u0 + maps.u1 * soc;
}

/// Internal resistance, exponential in temperature and clamped to
/// [r_floor, r_cap].
template <typename T>
T internal_resistance(const T& t_b, const BatteryMaps& maps) {
  using std::exp;
  const T r = maps.r_ref * exp(maps.k_r * (maps.t_ref - t_b));
  const double rv = value_of(r);
  if (rv < maps.r_floor) return T(maps.r_floor);
  if (rv > maps.r_cap) return T(maps.r_cap);
  return r;
}

template <typename T>
Electrical<T> battery_maps_eval(const T& soc, const T& t_b,
                                const BatteryMaps& maps) {
  return {open_circuit_voltage(soc, maps), internal_resistance(t_b, maps)};
}

namespace detail {

/// Weights of a piecewise-linear interpolant whose interior corners are
/// rounded by a quadratic over a window of width 0.4 * min(adjacent spacing).
/// The result is C1 inside the domain and constant outside it. At most three
/// data values contribute at any point.
template <typename T>
struct Stencil {
  int first = 0;
  int count = 0;
  std::array<T, 3> w{};
};

template <typename T>
Stencil<T> corner_smoothed_stencil(const std::vector<double>& x, const T& xq) {
  const int n = static_cast<int>(x.size());
  Stencil<T> st;
  const double xv = value_of(xq);
  if (xv <= x.front()) {
    st.first = 0;
    st.count = 1;
    st.w[0] = T(1.0);
    return st;
  }
  if (xv >= x.back()) {
    st.first = n - 1;
    st.count = 1;
    st.w[0] = T(1.0);
    return st;
  }
  const int seg = static_cast<int>(
      std::upper_bound(x.begin(), x.end(), xv) - x.begin()) - 1;

  // Closest interior node whose rounding window may contain xq.
  auto window = [&](int i) {
    return 0.4 * std::min(x[i] - x[i - 1], x[i + 1] - x[i]);
  };
  for (int i : {seg, seg + 1}) {
    if (i <= 0 || i >= n - 1) continue;
    const double d = window(i);
    if (std::abs(xv - x[i]) < 0.5 * d) {
      const double h0 = x[i] - x[i - 1];
      const double h1 = x[i + 1] - x[i];
      const T dx = xq - x[i];
      const T r = dx + 0.5 * d;
      const T q = r * r / (2.0 * d);
      // g = y_i + m0 dx + (m1 - m0) q, with m0 = (y_i - y_{i-1})/h0 and
      // m1 = (y_{i+1} - y_i)/h1, expanded into weights on the three values.
      st.first = i - 1;
      st.count = 3;
      st.w[0] = -dx / h0 + q / h0;
      st.w[1] = 1.0 + dx / h0 - q / h1 - q / h0;
      st.w[2] = q / h1;
      return st;
    }
  }
  const double h = x[seg + 1] - x[seg];
  const T t = (xq - x[seg]) / h;
  st.first = seg;
  st.count = 2;
  st.w[0] = 1.0 - t;
  st.w[1] = t;
  return st;
}

}  // namespace detail

template <typename T>
struct PowerLimits {
  T chg_min;   // W, <= 0
  T dchg_max;  // W, >= 0
};

/// Charge and discharge power limits from the (soc, T_b) grids. Separable
/// corner-smoothed bilinear interpolation: monotone along each axis whenever
/// the grid is, C1 inside the grid, clamped to the edge values outside it.
template <typename T>
PowerLimits<T> power_limits(const T& soc, const T& t_b,
                            const BatteryMaps& maps) {
  const auto& g = maps.limits;
  const auto a = detail::corner_smoothed_stencil(g.soc, soc);
  const auto b = detail::corner_smoothed_stencil(g.temperature, t_b);
  PowerLimits<T> out{T(0.0), T(0.0)};
  for (int i = 0; i < a.count; ++i) {
    T row_chg(0.0);
    T row_dchg(0.0);
    for (int j = 0; j < b.count; ++j) {
      row_chg += b.w[j] * g.charge_min(a.first + i, b.first + j);
      row_dchg += b.w[j] * g.discharge_max(a.first + i, b.first + j);
    }
    out.chg_min += a.w[i] * row_chg;
    out.dchg_max += a.w[i] * row_dchg;
  }
  return out;
}

template <typename T>
struct Propulsion {
  T p_prop;  // W, wheel power plus drivetrain loss
  T p_loss;  // W, drivetrain loss (>= k0)
};

template <typename T>
Propulsion<T> propulsion_power(const T& v, const T& a_t,
                               const VehicleParams& p) {
  const T wheel = p.mass * a_t * v;
  const T loss = p.k0 + p.k1 * wheel * wheel / p.p_base + p.k2 * v * v;
  return {wheel + loss, loss};
}

template <typename T>
struct HeatRates {
  T q_pass;  // W, Joule heat plus drivetrain share
  T q_act;   // W, HVCH heating minus HVAC cooling
  T q_exh;   // W, exchange with ambient

  T total() const { return q_pass + q_act + q_exh; }
};

template <typename T>
HeatRates<T> heat_rates(const T& soc, const T& t_b, const T& v, const T& p_b,
                        const T& p_hvch, const T& p_hvac, const T& p_loss,
                        double t_amb, const VehicleParams& p,
                        const BatteryMaps& maps) {
  const auto el = battery_maps_eval(soc, t_b, maps);
  HeatRates<T> q;
  q.q_pass = el.r_b * p_b * p_b / (el.u_oc * el.u_oc) + p.eps_ed * p_loss;
  q.q_act = p.eta_hvch * p_hvch - p.eta_hvac * p_hvac;
  q.q_exh = (p.gamma0 + p.gamma1 * v) * (t_amb - t_b);
  return q;
}

/// Battery terminal power that covers `demand` (W) after Joule loss: the
/// low-loss root of R P^2 / U^2 - P + demand = 0. Throws std::domain_error
/// when the demand exceeds what the pack can deliver (no real root).
template <typename T>
T battery_power_for_demand(const T& demand, const T& u_oc, const T& r_b) {
  using std::sqrt;
  const T disc = 1.0 - 4.0 * r_b * demand / (u_oc * u_oc);
  if (!(value_of(disc) >= 0.0))
    throw std::domain_error("power demand exceeds battery capability");
  return 2.0 * demand / (1.0 + sqrt(disc));
}

template <typename T>
struct AccelLimits {
  T a_min;
  T a_max;
};

/// Traction limits: the torque cap, or the EM power cap divided by speed.
template <typename T>
AccelLimits<T> accel_limits(const T& E, const VehicleParams& p) {
  using std::sqrt;
  T v = sqrt(2.0 * E);
  if (value_of(v) < p.v_eps) v = T(p.v_eps);
  T a = p.p_em_max / (p.mass * v);
  if (value_of(a) > p.a_cap) a = T(p.a_cap);
  return {-a, a};
}

}  // namespace ecoroute
