#include "ecoroute/transcription.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <stdexcept>

#include "ecoroute/dynamics.hpp"
#include "ecoroute/models.hpp"
#include "ecoroute/rk4.hpp"

namespace ecoroute {

// --- Layout ------------------------------------------------------------------

DecisionLayout::DecisionLayout(const RoadGrid& grid, int n_tau) : n_tau_(n_tau) {
  if (n_tau < 2) throw std::invalid_argument("n_tau must be at least 2");
  if (grid.size() < 2) throw std::invalid_argument("road grid needs at least 2 nodes");
  const int last = grid.size() - 1;
  int start = 0;
  int offset = 0;
  for (std::size_t i = 0; i <= grid.charger_nodes.size(); ++i) {
    const bool at_charger = i < grid.charger_nodes.size();
    const int end = at_charger ? grid.charger_nodes[i] : last;
    if (end <= start)
      throw std::invalid_argument("charger nodes must be increasing and past node 0");
    segments_.push_back({start, end - start + 1, offset});
    offset += kDriveWidth * (end - start + 1);
    if (!at_charger) break;
    charges_.push_back({static_cast<int>(i), end, offset});
    offset += 2 + kChargeWidth * n_tau;
    start = end;
    if (end == last) break;  // terminal charger, no trailing segment
  }
  if (charges_.size() != grid.charger_nodes.size())
    throw std::invalid_argument("charger after the final node");
  n_ = offset;
}

// --- Kernels -----------------------------------------------------------------

namespace {

enum class Kernel {
  kDriveDefect,     // E, soc, T, hvch, hvac, a | E1, soc1, T1 -> 3 rows
  kChargeDefect,    // soc, T, hvch, hvac, pgrid | soc1, T1 | t_chg -> 2
  kDriveBalance,    // E, soc, T, hvch, hvac, a, pb -> 1
  kChargeBalance,   // soc, T, hvch, hvac, pgrid, pb -> 1
  kTransition,      // a, b -> 1
  kDriveNode,       // E, soc, T, a, pb -> 4
  kDriveInterval,   // as kDriveDefect -> 6
  kChargeNode,      // soc, T, pb -> 1
  kChargeInterval,  // soc1, T1, hvch, hvac, pgrid -> 1
  kSlack,           // t_chg, sigma -> 1
};

constexpr int kMaxVars = 12;
constexpr int kMaxRows = 6;

struct Block {
  Kernel kind = Kernel::kTransition;
  bool eq = true;
  int row = 0;
  int n_rows = 0;
  int n_vars = 0;
  std::array<int, kMaxVars> vars{};
  double h = 0.0;                     // step: metres or tau
  std::array<double, 3> alpha{};      // gradient at s, s + h/2, s + h
  double e_mid_min = 0.0;             // speed band at the interval midpoint
  double e_mid_max = 0.0;
  double t_free = 0.0;
  std::vector<int> slots;             // n_rows * n_vars positions in the CSR values
};

// Kinetic-energy floor for RK4 stages: identity above 1 m^2/s^2 and the C1
// continuation 1/(2 - E) below, so stage speeds stay positive.
template <typename T>
T floor_energy(const T& e) {
  if (value_of(e) >= 1.0) return e;
  return 1.0 / (2.0 - e);
}

struct KernelContext {
  const VehicleParams& veh;
  const BatteryMaps& bat;
  ModelContext mc;
};

template <typename T>
DrivingState<T> drive_stage(const DrivingState<T>& x, const T& hvch, const T& hvac,
                            const T& a, double alpha, const KernelContext& c) {
  using std::sqrt;
  DrivingState<T> xs = x;
  xs[kE] = floor_energy(x[kE]);
  const T v = sqrt(2.0 * xs[kE]);
  const auto el = battery_maps_eval(xs[kSocD], xs[kTbD], c.bat);
  const T pb = smooth_battery_power(driving_demand(v, a, hvch, hvac, c.veh), el.u_oc,
                                    el.r_b);
  return driving_rhs(xs, DrivingControl<T>{hvch, hvac, a, pb}, T(alpha), c.mc);
}

template <typename T>
ChargingState<T> charge_stage(const ChargingState<T>& x, const T& hvch, const T& hvac,
                              const T& pgrid, const T& t_chg, const KernelContext& c) {
  const auto el = battery_maps_eval(x[kSocC], x[kTbC], c.bat);
  const T pb = smooth_battery_power(charging_demand(hvch, hvac, pgrid, c.veh), el.u_oc,
                                    el.r_b);
  return charging_rhs(x, ChargingControl<T>{hvch, hvac, pgrid, pb}, t_chg, c.mc);
}

// r(P) = R P^2 / U^2 + demand - P, decreasing in P on the physical branch.
template <typename T>
T balance_residual(const T& p, const T& demand, const Electrical<T>& el) {
  return el.r_b * p * p / (el.u_oc * el.u_oc) + demand - p;
}

template <typename T>
void run_kernel(const Block& b, const T* x, T* r, const KernelContext& c) {
  using std::sqrt;
  const auto& veh = c.veh;
  switch (b.kind) {
    case Kernel::kDriveDefect: {
      const DrivingState<T> x0(x[0], x[1], x[2]);
      auto f = [&](double s, const DrivingState<T>& xs) {
        const int idx = s < 0.25 * b.h ? 0 : (s < 0.75 * b.h ? 1 : 2);
        return drive_stage(xs, x[3], x[4], x[5], b.alpha[idx], c);
      };
      const DrivingState<T> x1 = rk4_step(f, 0.0, x0, b.h);
      for (int i = 0; i < 3; ++i) r[i] = x[6 + i] - x1[i];
      return;
    }
    case Kernel::kChargeDefect: {
      const ChargingState<T> x0(x[0], x[1]);
      auto f = [&](double, const ChargingState<T>& xs) {
        return charge_stage(xs, x[2], x[3], x[4], x[7], c);
      };
      const ChargingState<T> x1 = rk4_step(f, 0.0, x0, b.h);
      r[0] = x[5] - x1[0];
      r[1] = x[6] - x1[1];
      return;
    }
    case Kernel::kDriveBalance: {
      const DrivingState<T> xs(x[0], x[1], x[2]);
      r[0] = driving_power_balance(xs, DrivingControl<T>{x[3], x[4], x[5], x[6]}, c.mc);
      return;
    }
    case Kernel::kChargeBalance: {
      const ChargingState<T> xs(x[0], x[1]);
      r[0] = charging_power_balance(xs, ChargingControl<T>{x[2], x[3], x[4], x[5]}, c.mc);
      return;
    }
    case Kernel::kTransition:
      r[0] = x[0] - x[1];
      return;
    case Kernel::kDriveNode: {
      const auto lim = power_limits(x[1], x[2], c.bat);
      const auto acc = accel_limits(x[0], veh);
      r[0] = x[4] - lim.dchg_max;
      r[1] = lim.chg_min - x[4];
      r[2] = x[3] - acc.a_max;
      r[3] = acc.a_min - x[3];
      return;
    }
    case Kernel::kDriveInterval: {
      // Battery power at the interval end under the interval's controls,
      // expressed through the sign of the balance residual.
      const T v1 = sqrt(2.0 * x[6]);
      const auto el = battery_maps_eval(x[7], x[8], c.bat);
      const auto lim = power_limits(x[7], x[8], c.bat);
      const T demand = driving_demand(v1, x[5], x[3], x[4], veh);
      r[0] = balance_residual(lim.dchg_max, demand, el);
      r[1] = -balance_residual(lim.chg_min, demand, el);
      const auto acc = accel_limits(x[6], veh);
      r[2] = x[5] - acc.a_max;
      r[3] = acc.a_min - x[5];
      // Cubic Hermite midpoint of E.
      const double ca = veh.air_coefficient();
      const double g0 = accel_grade_roll(b.alpha[0], veh);
      const double g1 = accel_grade_roll(b.alpha[2], veh);
      const T e_mid = 0.5 * (x[0] + x[6]) + b.h / 8.0 * (ca * (x[6] - x[0]) + (g1 - g0));
      r[4] = e_mid - b.e_mid_max;
      r[5] = b.e_mid_min - e_mid;
      return;
    }
    case Kernel::kChargeNode: {
      const auto lim = power_limits(x[0], x[1], c.bat);
      r[0] = lim.chg_min - x[2];
      return;
    }
    case Kernel::kChargeInterval: {
      const auto el = battery_maps_eval(x[0], x[1], c.bat);
      const auto lim = power_limits(x[0], x[1], c.bat);
      r[0] = -balance_residual(lim.chg_min, charging_demand(x[2], x[3], x[4], veh), el);
      return;
    }
    case Kernel::kSlack:
      r[0] = x[0] - b.t_free - x[1];
      return;
  }
}

constexpr double kScaleE = 256.0;
constexpr double kScaleSoc = 1.0;
constexpr double kScaleT = 16.0;
constexpr double kScaleThermal = 8192.0;
constexpr double kScaleAccel = 0.25;
constexpr double kScalePower = 65536.0;
constexpr double kScaleTime = 1024.0;

}  // namespace

struct Transcription::Blocks {
  std::vector<Block> list;
  int n_eq = 0;
  int n_in = 0;
  SparseRowMatrix peq, pin;
  Eigen::VectorXd eq_scale, in_scale;
  KernelContext ctx;

  explicit Blocks(const Scenario& scn)
      : ctx{scn.vehicle, scn.battery,
            ModelContext{scn.vehicle, scn.battery, scn.boundary.t_amb}} {}

  void add(Kernel kind, bool eq, std::initializer_list<int> vars, int n_rows,
           std::initializer_list<double> scales, Block proto = {}) {
    Block b = proto;
    b.kind = kind;
    b.eq = eq;
    b.n_rows = n_rows;
    b.n_vars = static_cast<int>(vars.size());
    std::copy(vars.begin(), vars.end(), b.vars.begin());
    int& counter = eq ? n_eq : n_in;
    b.row = counter;
    counter += n_rows;
    auto& sc = eq ? eq_scale_list : in_scale_list;
    sc.insert(sc.end(), scales.begin(), scales.end());
    list.push_back(b);
  }

  void finalize(int n) {
    auto build = [&](bool eq, int rows, SparseRowMatrix& m) {
      std::vector<Eigen::Triplet<double>> t;
      for (const auto& b : list)
        if (b.eq == eq)
          for (int i = 0; i < b.n_rows; ++i)
            for (int j = 0; j < b.n_vars; ++j) t.emplace_back(b.row + i, b.vars[j], 0.0);
      m.resize(rows, n);
      m.setFromTriplets(t.begin(), t.end());
      m.makeCompressed();
    };
    build(true, n_eq, peq);
    build(false, n_in, pin);
    for (auto& b : list) {
      const auto& m = b.eq ? peq : pin;
      b.slots.resize(static_cast<std::size_t>(b.n_rows) * b.n_vars);
      for (int i = 0; i < b.n_rows; ++i) {
        const int row = b.row + i;
        const int* first = m.innerIndexPtr() + m.outerIndexPtr()[row];
        const int* last = m.innerIndexPtr() + m.outerIndexPtr()[row + 1];
        for (int j = 0; j < b.n_vars; ++j)
          b.slots[i * b.n_vars + j] =
              static_cast<int>(std::lower_bound(first, last, b.vars[j]) - m.innerIndexPtr());
      }
    }
    eq_scale = Eigen::Map<Eigen::VectorXd>(eq_scale_list.data(), n_eq);
    in_scale = Eigen::Map<Eigen::VectorXd>(in_scale_list.data(), n_in);
  }

  std::vector<double> eq_scale_list, in_scale_list;
};

// --- Construction --------------------------------------------------------------

Transcription::Transcription(const Scenario& scn, TranscriptionOptions opts)
    : scn_(scn), opts_(opts) {
  validate(scn_);
  if (!(opts_.ds > 0)) throw std::invalid_argument("ds must be positive");
  grid_ = resample_road(scn_, opts_.ds);
  layout_ = DecisionLayout(grid_, opts_.n_tau);
  blocks_ = std::make_unique<Blocks>(scn_);
  auto& B = *blocks_;
  const auto& L = layout_;
  const auto& road = scn_.road;
  const int ntau = L.n_tau();

  auto drive_vars = [&](int seg, int k) {
    std::array<int, kDriveWidth> v{};
    for (int f = 0; f < kDriveWidth; ++f) v[f] = L.drive(seg, k, f);
    return v;
  };
  auto charge_vars = [&](int i, int j) {
    std::array<int, kChargeWidth> v{};
    for (int f = 0; f < kChargeWidth; ++f) v[f] = L.charge(i, j, f);
    return v;
  };

  for (std::size_t seg = 0; seg < L.segments().size(); ++seg) {
    const auto& S = L.segments()[seg];
    const int sg = static_cast<int>(seg);
    // Departure transition from the preceding charge.
    if (seg > 0) {
      const int i = sg - 1;
      B.add(Kernel::kTransition, true,
            {L.drive(sg, 0, kFieldSoc), L.charge(i, ntau - 1, kCFieldSoc)}, 1, {kScaleSoc});
      B.add(Kernel::kTransition, true,
            {L.drive(sg, 0, kFieldTb), L.charge(i, ntau - 1, kCFieldTb)}, 1, {kScaleT});
    }
    for (int k = 0; k < S.n_nodes; ++k) {
      const auto v = drive_vars(sg, k);
      B.add(Kernel::kDriveBalance, true, {v[0], v[1], v[2], v[3], v[4], v[5], v[6]}, 1,
            {kScalePower});
      B.add(Kernel::kDriveNode, false, {v[0], v[1], v[2], v[5], v[6]}, 4,
            {kScalePower, kScalePower, kScaleAccel, kScaleAccel});
      if (k + 1 == S.n_nodes) continue;
      const auto w = drive_vars(sg, k + 1);
      const double s0 = grid_.s[S.first_node + k];
      const double s1 = grid_.s[S.first_node + k + 1];
      Block proto;
      proto.h = s1 - s0;
      proto.alpha = {road.gradient_at(s0), road.gradient_at(0.5 * (s0 + s1)),
                     road.gradient_at(s1)};
      const double vmin = road.v_min_at(0.5 * (s0 + s1));
      const double vmax = road.v_max_at(0.5 * (s0 + s1));
      proto.e_mid_min = 0.5 * vmin * vmin;
      proto.e_mid_max = 0.5 * vmax * vmax;
      const std::initializer_list<int> vars = {v[0], v[1], v[2], v[3], v[4],
                                               v[5], w[0], w[1], w[2]};
      B.add(Kernel::kDriveDefect, true, vars, 3, {kScaleE, kScaleSoc, kScaleT}, proto);
      B.add(Kernel::kDriveInterval, false, vars, 6,
            {kScalePower, kScalePower, kScaleAccel, kScaleAccel, kScaleE, kScaleE}, proto);
    }
    if (seg >= L.charges().size()) continue;
    // Charge attached to the end of this segment.
    const int i = sg;
    const int last = S.n_nodes - 1;
    B.add(Kernel::kTransition, true,
          {L.charge(i, 0, kCFieldSoc), L.drive(sg, last, kFieldSoc)}, 1, {kScaleSoc});
    B.add(Kernel::kTransition, true,
          {L.charge(i, 0, kCFieldTb), L.drive(sg, last, kFieldTb)}, 1, {kScaleT});
    for (int j = 0; j < ntau; ++j) {
      const auto v = charge_vars(i, j);
      B.add(Kernel::kChargeBalance, true, {v[0], v[1], v[2], v[3], v[4], v[5]}, 1,
            {kScalePower});
      B.add(Kernel::kChargeNode, false, {v[0], v[1], v[5]}, 1, {kScalePower});
      if (j + 1 == ntau) continue;
      const auto w = charge_vars(i, j + 1);
      Block proto;
      proto.h = 1.0 / (ntau - 1);
      B.add(Kernel::kChargeDefect, true, {v[0], v[1], v[2], v[3], v[4], w[0], w[1], L.t_chg(i)},
            2, {kScaleSoc, kScaleT}, proto);
      B.add(Kernel::kChargeInterval, false, {w[0], w[1], v[2], v[3], v[4]}, 1, {kScalePower});
    }
    Block proto;
    proto.t_free = scn_.chargers[L.charges()[i].charger].t_free;
    B.add(Kernel::kSlack, false, {L.t_chg(i), L.sigma(i)}, 1, {kScaleTime}, proto);
  }
  B.finalize(layout_.size());

  build_bounds();

  NlpEval ev;
  evaluate(initial_guess(), ev, false);
  obj_scale_ = power_of_two_at_least(std::max(1.0, std::abs(ev.f)));
}

Transcription::~Transcription() = default;

int Transcription::num_equalities() const { return blocks_->n_eq; }
int Transcription::num_inequalities() const { return blocks_->n_in; }
const SparseRowMatrix& Transcription::equality_pattern() const { return blocks_->peq; }
const SparseRowMatrix& Transcription::inequality_pattern() const { return blocks_->pin; }
const Eigen::VectorXd& Transcription::equality_scale() const { return blocks_->eq_scale; }
const Eigen::VectorXd& Transcription::inequality_scale() const {
  return blocks_->in_scale;
}

std::unique_ptr<ScaledNlp> Transcription::scaled() const {
  return std::make_unique<ScaledNlp>(*this, var_scale_, blocks_->eq_scale,
                                     blocks_->in_scale, obj_scale_);
}

void Transcription::build_bounds() {
  const int n = layout_.size();
  const double inf = std::numeric_limits<double>::infinity();
  lower_ = Eigen::VectorXd::Constant(n, -inf);
  upper_ = Eigen::VectorXd::Constant(n, inf);
  var_scale_ = Eigen::VectorXd::Ones(n);
  const auto& bc = scn_.boundary;
  const auto& veh = scn_.vehicle;
  const auto& bat = scn_.battery;
  const double u_min = open_circuit_voltage(bc.soc_min, bat);
  const double pb_max = 0.9 * u_min * u_min / (2.0 * bat.r_floor);

  auto set = [&](int idx, double lo, double hi, double scale) {
    lower_[idx] = lo;
    upper_[idx] = hi;
    var_scale_[idx] = scale;
  };
  for (std::size_t sg = 0; sg < layout_.segments().size(); ++sg) {
    const auto& S = layout_.segments()[sg];
    for (int k = 0; k < S.n_nodes; ++k) {
      const int node = S.first_node + k;
      auto at = [&](int f) { return layout_.drive(static_cast<int>(sg), k, f); };
      const double vmin = grid_.v_min[node], vmax = grid_.v_max[node];
      set(at(kFieldE), 0.5 * vmin * vmin, 0.5 * vmax * vmax, kScaleE);
      set(at(kFieldSoc), bc.soc_min, bc.soc_max, kScaleSoc);
      set(at(kFieldTb), bc.t_b_min, bc.t_b_max, kScaleT);
      set(at(kFieldHvch), 0.0, veh.hvch_battery_max_driving(), kScaleThermal);
      set(at(kFieldHvac), 0.0, veh.hvac_battery_max(), kScaleThermal);
      set(at(kFieldAt), -veh.a_cap, veh.a_cap, kScaleAccel);
      set(at(kFieldPb), -pb_max, pb_max, kScalePower);
    }
  }
  for (std::size_t i = 0; i < layout_.charges().size(); ++i) {
    const int ii = static_cast<int>(i);
    const auto& ch = scn_.chargers[layout_.charges()[i].charger];
    set(layout_.t_chg(ii), 1.0, ch.t_chg_max, kScaleTime);
    set(layout_.sigma(ii), 0.0, ch.t_chg_max, kScaleTime);
    for (int j = 0; j < layout_.n_tau(); ++j) {
      auto at = [&](int f) { return layout_.charge(ii, j, f); };
      set(at(kCFieldSoc), bc.soc_min, bc.soc_max, kScaleSoc);
      set(at(kCFieldTb), bc.t_b_min, bc.t_b_max, kScaleT);
      set(at(kCFieldHvch), 0.0, veh.hvch_battery_max_charging(), kScaleThermal);
      set(at(kCFieldHvac), 0.0, veh.hvac_battery_max(), kScaleThermal);
      set(at(kCFieldPgrid), 0.0, ch.p_grid_max, kScalePower);
      set(at(kCFieldPb), -pb_max, 0.0, kScalePower);
    }
  }
  // Initial conditions.
  const int e0 = layout_.drive(0, 0, kFieldE);
  lower_[e0] = upper_[e0] = 0.5 * bc.v_0 * bc.v_0;
  const int soc0 = layout_.drive(0, 0, kFieldSoc);
  const int t0 = layout_.drive(0, 0, kFieldTb);
  lower_[soc0] = upper_[soc0] = bc.soc_0;
  lower_[t0] = upper_[t0] = bc.t_b0;
  // Terminal conditions.
  int soc_f, t_f;
  if (layout_.terminal_charge()) {
    const int i = static_cast<int>(layout_.charges().size()) - 1;
    soc_f = layout_.charge(i, layout_.n_tau() - 1, kCFieldSoc);
    t_f = layout_.charge(i, layout_.n_tau() - 1, kCFieldTb);
  } else {
    const int sg = static_cast<int>(layout_.segments().size()) - 1;
    const int k = layout_.segments().back().n_nodes - 1;
    soc_f = layout_.drive(sg, k, kFieldSoc);
    t_f = layout_.drive(sg, k, kFieldTb);
  }
  lower_[soc_f] = std::max(lower_[soc_f], bc.soc_f_min);
  lower_[t_f] = std::max(lower_[t_f], bc.t_bf_min);
}

// --- Evaluation ----------------------------------------------------------------

namespace {

double inv_speed(double e) { return 1.0 / std::sqrt(2.0 * e); }

}  // namespace

void Transcription::evaluate(const Eigen::VectorXd& z, NlpEval& out,
                             bool derivatives) const {
  if (z.size() != layout_.size())
    throw std::invalid_argument("decision vector has the wrong length");
  const auto& B = *blocks_;
  const auto& L = layout_;
  const double ct = scn_.costs.c_t_trip;

  // Objective.
  out.f = 0.0;
  if (derivatives) out.grad = Eigen::VectorXd::Zero(z.size());
  for (std::size_t sg = 0; sg < L.segments().size(); ++sg) {
    const auto& S = L.segments()[sg];
    for (int k = 0; k + 1 < S.n_nodes; ++k) {
      const double h = grid_.s[S.first_node + k + 1] - grid_.s[S.first_node + k];
      const int a = L.drive(static_cast<int>(sg), k, kFieldE);
      const int b = L.drive(static_cast<int>(sg), k + 1, kFieldE);
      out.f += ct * h / 2.0 * (inv_speed(z[a]) + inv_speed(z[b]));
      if (derivatives) {
        // d/dE (2E)^(-1/2) = -(2E)^(-3/2)
        out.grad[a] -= ct * h / 2.0 * std::pow(2.0 * z[a], -1.5);
        out.grad[b] -= ct * h / 2.0 * std::pow(2.0 * z[b], -1.5);
      }
    }
  }
  const int ntau = L.n_tau();
  for (std::size_t i = 0; i < L.charges().size(); ++i) {
    const int ii = static_cast<int>(i);
    const auto& ch = scn_.chargers[L.charges()[i].charger];
    const double t = z[L.t_chg(ii)];
    double sum = 0.0;
    for (int j = 0; j + 1 < ntau; ++j) sum += ct + ch.c_e * z[L.charge(ii, j, kCFieldPgrid)];
    const double w = 1.0 / (ntau - 1);
    out.f += t * w * sum + ch.c_T * z[L.sigma(ii)];
    if (derivatives) {
      out.grad[L.t_chg(ii)] += w * sum;
      out.grad[L.sigma(ii)] += ch.c_T;
      for (int j = 0; j + 1 < ntau; ++j)
        out.grad[L.charge(ii, j, kCFieldPgrid)] += t * w * ch.c_e;
    }
  }

  // Constraints.
  out.ceq.resize(B.n_eq);
  out.cin.resize(B.n_in);
  if (derivatives) {
    out.jeq = B.peq;
    out.jin = B.pin;
    std::fill_n(out.jeq.valuePtr(), out.jeq.nonZeros(), 0.0);
    std::fill_n(out.jin.valuePtr(), out.jin.nonZeros(), 0.0);
  }
  std::array<double, kMaxVars> xd;
  std::array<double, kMaxRows> rd;
  std::array<AdScalar, kMaxVars> xa;
  std::array<AdScalar, kMaxRows> ra;
  for (const auto& b : B.list) {
    Eigen::VectorXd& c = b.eq ? out.ceq : out.cin;
    if (!derivatives) {
      for (int j = 0; j < b.n_vars; ++j) xd[j] = z[b.vars[j]];
      run_kernel(b, xd.data(), rd.data(), B.ctx);
      for (int i = 0; i < b.n_rows; ++i) c[b.row + i] = rd[i];
      continue;
    }
    for (int j = 0; j < b.n_vars; ++j)
      xa[j] = ad_variable(z[b.vars[j]], j);
    run_kernel(b, xa.data(), ra.data(), B.ctx);
    double* values = (b.eq ? out.jeq : out.jin).valuePtr();
    for (int i = 0; i < b.n_rows; ++i) {
      c[b.row + i] = ra[i].value();
      const auto& d = ra[i].derivatives();
      for (int j = 0; j < b.n_vars; ++j) values[b.slots[i * b.n_vars + j]] += d[j];
    }
  }
  if (!std::isfinite(out.f) || !out.ceq.allFinite() || !out.cin.allFinite())
    throw std::domain_error("non-finite NLP value");
}

// --- Initial guess -------------------------------------------------------------

Eigen::VectorXd Transcription::initial_guess() const {
  const auto& L = layout_;
  const auto& bc = scn_.boundary;
  const auto& veh = scn_.vehicle;
  const auto& bat = scn_.battery;
  Eigen::VectorXd z = Eigen::VectorXd::Zero(L.size());
  const double t_target = std::max(bc.t_amb, 20.0);
  constexpr double kRelaxLength = 100e3;  // m
  auto soc_at = [&](double s) {
    return std::clamp(bc.soc_0 - 0.2 * s / 100e3, bc.soc_min, bc.soc_max);
  };
  auto t_at = [&](double s) {
    return t_target + (bc.t_b0 - t_target) * std::exp(-s / kRelaxLength);
  };
  auto clip = [&](int idx, double v) { z[idx] = std::clamp(v, lower_[idx], upper_[idx]); };

  for (std::size_t sg = 0; sg < L.segments().size(); ++sg) {
    const auto& S = L.segments()[sg];
    for (int k = 0; k < S.n_nodes; ++k) {
      const int node = S.first_node + k;
      auto at = [&](int f) { return L.drive(static_cast<int>(sg), k, f); };
      const double s = grid_.s[node];
      const double v = 0.5 * (grid_.v_min[node] + grid_.v_max[node]);
      clip(at(kFieldE), 0.5 * v * v);
      clip(at(kFieldSoc), soc_at(s));
      clip(at(kFieldTb), t_at(s));
      const double e = z[at(kFieldE)];
      const double a = accel_air(e, veh) + accel_grade_roll(grid_.alpha[node], veh);
      const auto lim = accel_limits(e, veh);
      clip(at(kFieldAt), std::clamp(a, lim.a_min, lim.a_max));
      const auto el = battery_maps_eval(z[at(kFieldSoc)], z[at(kFieldTb)], bat);
      const double demand = driving_demand(std::sqrt(2.0 * e), z[at(kFieldAt)], 0.0, 0.0, veh);
      clip(at(kFieldPb), smooth_battery_power(demand, el.u_oc, el.r_b));
    }
  }
  for (std::size_t i = 0; i < L.charges().size(); ++i) {
    const int ii = static_cast<int>(i);
    const auto& ch = scn_.chargers[L.charges()[i].charger];
    clip(L.t_chg(ii), 0.5 * ch.t_chg_max);
    clip(L.sigma(ii), std::max(0.0, z[L.t_chg(ii)] - ch.t_free));
    const double s = grid_.s[L.charges()[i].node];
    for (int j = 0; j < L.n_tau(); ++j) {
      auto at = [&](int f) { return L.charge(ii, j, f); };
      clip(at(kCFieldSoc), soc_at(s));
      clip(at(kCFieldTb), t_at(s));
      clip(at(kCFieldPgrid), 0.5 * ch.p_grid_max);
      const auto el = battery_maps_eval(z[at(kCFieldSoc)], z[at(kCFieldTb)], bat);
      clip(at(kCFieldPb), smooth_battery_power(
                              charging_demand(0.0, 0.0, z[at(kCFieldPgrid)], veh),
                              el.u_oc, el.r_b));
    }
  }
  return z;
}

Eigen::VectorXd Transcription::random_point(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto& g = scn_.battery.limits;
  const double p_lo = g.charge_min.minCoeff();
  const double p_hi = g.discharge_max.maxCoeff();
  std::vector<bool> power(layout_.size(), false);
  for (std::size_t sg = 0; sg < layout_.segments().size(); ++sg)
    for (int k = 0; k < layout_.segments()[sg].n_nodes; ++k)
      power[layout_.drive(static_cast<int>(sg), k, kFieldPb)] = true;
  for (std::size_t i = 0; i < layout_.charges().size(); ++i)
    for (int j = 0; j < layout_.n_tau(); ++j)
      power[layout_.charge(static_cast<int>(i), j, kCFieldPb)] = true;
  Eigen::VectorXd z(layout_.size());
  for (int i = 0; i < z.size(); ++i) {
    double lo = lower_[i], hi = upper_[i];
    if (power[i]) {
      lo = std::max(lo, p_lo);
      hi = std::min(hi, p_hi);
    }
    z[i] = lo + unit(rng) * (hi - lo);
  }
  return z;
}

// --- Extraction ----------------------------------------------------------------

TripSolution Transcription::extract_solution(const Eigen::VectorXd& z) const {
  if (z.size() != layout_.size())
    throw std::invalid_argument("decision vector has the wrong length");
  const auto& L = layout_;
  TripSolution sol;
  sol.c_t_trip = scn_.costs.c_t_trip;
  for (std::size_t sg = 0; sg < L.segments().size(); ++sg) {
    const auto& S = L.segments()[sg];
    DrivingSegment d;
    for (int k = 0; k < S.n_nodes; ++k) {
      auto at = [&](int f) { return z[L.drive(static_cast<int>(sg), k, f)]; };
      d.s.push_back(grid_.s[S.first_node + k]);
      d.E.push_back(at(kFieldE));
      d.v.push_back(std::sqrt(2.0 * at(kFieldE)));
      d.soc.push_back(at(kFieldSoc));
      d.t_b.push_back(at(kFieldTb));
      d.p_hvch.push_back(at(kFieldHvch));
      d.p_hvac.push_back(at(kFieldHvac));
      d.a_t.push_back(at(kFieldAt));
      d.p_b.push_back(at(kFieldPb));
      if (k > 0)
        sol.driving_time += 0.5 * (d.s[k] - d.s[k - 1]) * (1.0 / d.v[k] + 1.0 / d.v[k - 1]);
    }
    sol.segments.push_back(std::move(d));
  }
  const int ntau = L.n_tau();
  for (std::size_t i = 0; i < L.charges().size(); ++i) {
    const int ii = static_cast<int>(i);
    const auto& C = L.charges()[i];
    const auto& ch = scn_.chargers[C.charger];
    ChargingPhase c;
    c.charger = C.charger;
    c.s = grid_.s[C.node];
    c.t_chg = z[L.t_chg(ii)];
    c.sigma = z[L.sigma(ii)];
    double grid_sum = 0.0;
    for (int j = 0; j < ntau; ++j) {
      auto at = [&](int f) { return z[L.charge(ii, j, f)]; };
      c.tau.push_back(static_cast<double>(j) / (ntau - 1));
      c.soc.push_back(at(kCFieldSoc));
      c.t_b.push_back(at(kCFieldTb));
      c.p_hvch.push_back(at(kCFieldHvch));
      c.p_hvac.push_back(at(kCFieldHvac));
      c.p_grid.push_back(at(kCFieldPgrid));
      c.p_b.push_back(at(kCFieldPb));
      if (j + 1 < ntau) grid_sum += at(kCFieldPgrid);
    }
    sol.charging_time += c.t_chg;
    sol.costs.energy_cost.push_back(ch.c_e * c.t_chg / (ntau - 1) * grid_sum);
    sol.costs.occupancy_cost.push_back(ch.c_T * c.sigma);
    sol.charges.push_back(std::move(c));
  }
  sol.costs.trip_time_cost = sol.c_t_trip * sol.trip_time();
  sol.costs.total = sol.costs.trip_time_cost + sol.costs.energy_cost_total() +
                    sol.costs.occupancy_cost_total();
  return sol;
}

Eigen::VectorXd Transcription::pack(const TripSolution& sol) const {
  const auto& L = layout_;
  if (sol.segments.size() != L.segments().size() || sol.charges.size() != L.charges().size())
    throw std::invalid_argument("trip solution does not match the layout");
  Eigen::VectorXd z(L.size());
  for (std::size_t sg = 0; sg < L.segments().size(); ++sg) {
    const auto& d = sol.segments[sg];
    if (static_cast<int>(d.size()) != L.segments()[sg].n_nodes)
      throw std::invalid_argument("driving segment has the wrong node count");
    for (int k = 0; k < L.segments()[sg].n_nodes; ++k) {
      auto at = [&](int f) -> double& { return z[L.drive(static_cast<int>(sg), k, f)]; };
      at(kFieldE) = d.E[k];
      at(kFieldSoc) = d.soc[k];
      at(kFieldTb) = d.t_b[k];
      at(kFieldHvch) = d.p_hvch[k];
      at(kFieldHvac) = d.p_hvac[k];
      at(kFieldAt) = d.a_t[k];
      at(kFieldPb) = d.p_b[k];
    }
  }
  for (std::size_t i = 0; i < L.charges().size(); ++i) {
    const int ii = static_cast<int>(i);
    const auto& c = sol.charges[i];
    if (static_cast<int>(c.size()) != L.n_tau())
      throw std::invalid_argument("charging phase has the wrong node count");
    z[L.t_chg(ii)] = c.t_chg;
    z[L.sigma(ii)] = c.sigma;
    for (int j = 0; j < L.n_tau(); ++j) {
      auto at = [&](int f) -> double& { return z[L.charge(ii, j, f)]; };
      at(kCFieldSoc) = c.soc[j];
      at(kCFieldTb) = c.t_b[j];
      at(kCFieldHvch) = c.p_hvch[j];
      at(kCFieldHvac) = c.p_hvac[j];
      at(kCFieldPgrid) = c.p_grid[j];
      at(kCFieldPb) = c.p_b[j];
    }
  }
  return z;
}

}  // namespace ecoroute
