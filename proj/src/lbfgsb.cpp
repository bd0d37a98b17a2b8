#include "ecoroute/lbfgsb.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/LU>

namespace ecoroute {

std::string to_string(LbfgsbStatus s) {
  switch (s) {
    case LbfgsbStatus::kConverged: return "converged";
    case LbfgsbStatus::kMaxIterations: return "max_iterations";
    case LbfgsbStatus::kLineSearchFailed: return "line_search_failed";
  }
  return "unknown";
}

double projected_gradient_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& g,
                               const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
  double out = 0.0;
  for (int i = 0; i < x.size(); ++i) {
    const double p = std::clamp(x[i] - g[i], lower[i], upper[i]);
    out = std::max(out, std::abs(p - x[i]));
  }
  return out;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEps = std::numeric_limits<double>::epsilon();

// Generalized Cauchy point along the projected steepest-descent path.
// Returns x_cp; `c` receives W^T (x_cp - x).
Eigen::VectorXd cauchy_point(const Eigen::VectorXd& x, const Eigen::VectorXd& g,
                             const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                             const LbfgsbMemory& mem, Eigen::VectorXd& c) {
  const int n = static_cast<int>(x.size());
  const double theta = mem.theta();
  const auto& W = mem.W();
  const auto& M = mem.M();
  const int k2 = static_cast<int>(W.cols());

  Eigen::VectorXd t(n), d(n);
  std::vector<int> order;
  for (int i = 0; i < n; ++i) {
    if (g[i] < 0.0 && hi[i] < kInf)
      t[i] = (x[i] - hi[i]) / g[i];
    else if (g[i] > 0.0 && lo[i] > -kInf)
      t[i] = (x[i] - lo[i]) / g[i];
    else
      t[i] = kInf;
    d[i] = t[i] == 0.0 ? 0.0 : -g[i];
    if (t[i] > 0.0 && t[i] < kInf) order.push_back(i);
  }
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return t[a] < t[b] || (t[a] == t[b] && a < b);
  });

  Eigen::VectorXd xcp = x;
  Eigen::VectorXd p = k2 ? Eigen::VectorXd(W.transpose() * d) : Eigen::VectorXd();
  c = Eigen::VectorXd::Zero(k2);
  double fp = -d.squaredNorm();
  double fpp = -theta * fp - (k2 ? p.dot(M * p) : 0.0);
  const double fpp0 = std::max(-theta * fp, kEps);
  fpp = std::max(fpp, kEps * fpp0);
  double dt_min = fp < 0.0 ? -fp / fpp : 0.0;
  double t_old = 0.0;
  std::size_t pos = 0;
  for (; pos < order.size(); ++pos) {
    const int b = order[pos];
    const double dt = t[b] - t_old;
    if (dt_min < dt) break;
    xcp[b] = d[b] > 0.0 ? hi[b] : lo[b];
    const double zb = xcp[b] - x[b];
    const double gb = g[b];
    if (k2) {
      c += dt * p;
      const Eigen::VectorXd wb = W.row(b).transpose();
      const Eigen::VectorXd Mwb = M * wb;
      fp += dt * fpp + gb * gb + theta * gb * zb - gb * Mwb.dot(c);
      fpp += -theta * gb * gb - 2.0 * gb * Mwb.dot(p) - gb * gb * wb.dot(Mwb);
      p += gb * wb;
    } else {
      fp += dt * fpp + gb * gb + theta * gb * zb;
      fpp += -theta * gb * gb;
    }
    d[b] = 0.0;
    fpp = std::max(fpp, kEps * fpp0);
    dt_min = fp < 0.0 ? -fp / fpp : 0.0;
    t_old = t[b];
  }
  dt_min = std::max(dt_min, 0.0);
  t_old += dt_min;
  for (int i = 0; i < n; ++i)
    if (d[i] != 0.0) xcp[i] = std::clamp(x[i] + t_old * d[i], lo[i], hi[i]);
  if (k2) c += dt_min * p;
  return xcp;
}

// Minimizes the quadratic model over the variables free at x_cp and returns
// the trial point x_bar (feasible).
Eigen::VectorXd subspace_minimize(const Eigen::VectorXd& x, const Eigen::VectorXd& g,
                                  const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                                  const LbfgsbMemory& mem, const Eigen::VectorXd& xcp,
                                  const Eigen::VectorXd& c) {
  const int n = static_cast<int>(x.size());
  std::vector<int> free;
  for (int i = 0; i < n; ++i)
    if (xcp[i] > lo[i] && xcp[i] < hi[i]) free.push_back(i);
  if (free.empty()) return xcp;
  const double theta = mem.theta();
  const auto& W = mem.W();
  const int k2 = static_cast<int>(W.cols());
  const int nf = static_cast<int>(free.size());

  Eigen::VectorXd full = g + theta * (xcp - x);
  if (k2) full -= W * (mem.M() * c);
  Eigen::VectorXd r(nf);
  Eigen::MatrixXd WZ(nf, k2);
  for (int j = 0; j < nf; ++j) {
    r[j] = full[free[j]];
    if (k2) WZ.row(j) = W.row(free[j]);
  }
  Eigen::VectorXd du = -r / theta;
  if (k2) {
    const Eigen::VectorXd v = mem.M() * (WZ.transpose() * r);
    const Eigen::MatrixXd N =
        Eigen::MatrixXd::Identity(k2, k2) - (mem.M() * (WZ.transpose() * WZ)) / theta;
    du -= WZ * N.partialPivLu().solve(v) / (theta * theta);
  }

  // Projection of the subspace step; truncation when it is not a descent step.
  Eigen::VectorXd xbar = xcp;
  for (int j = 0; j < nf; ++j) {
    const int i = free[j];
    xbar[i] = std::clamp(xcp[i] + du[j], lo[i], hi[i]);
  }
  if ((xbar - x).dot(g) < 0.0) return xbar;
  double alpha = 1.0;
  for (int j = 0; j < nf; ++j) {
    const int i = free[j];
    if (du[j] > 0.0) alpha = std::min(alpha, (hi[i] - xcp[i]) / du[j]);
    if (du[j] < 0.0) alpha = std::min(alpha, (lo[i] - xcp[i]) / du[j]);
  }
  xbar = xcp;
  for (int j = 0; j < nf; ++j) {
    const int i = free[j];
    xbar[i] = std::clamp(xcp[i] + alpha * du[j], lo[i], hi[i]);
  }
  return xbar;
}

struct LinePoint {
  double a = 0.0, f = 0.0, d = 0.0;
};

}  // namespace

LbfgsbMemory::LbfgsbMemory(int n, int m) : n_(n), m_(m) { clear(); }

void LbfgsbMemory::clear() {
  s_.clear();
  y_.clear();
  theta_ = 1.0;
  W_.resize(n_, 0);
  M_.resize(0, 0);
}

bool LbfgsbMemory::push(const Eigen::VectorXd& s, const Eigen::VectorXd& y) {
  const double sy = s.dot(y);
  const double yy = y.squaredNorm();
  if (!(sy > kEps * yy) || !(yy > 0.0)) return false;
  s_.push_back(s);
  y_.push_back(y);
  if (size() > m_) {
    s_.pop_front();
    y_.pop_front();
  }
  theta_ = yy / sy;
  rebuild();
  return true;
}

void LbfgsbMemory::rebuild() {
  const int k = size();
  Eigen::MatrixXd S(n_, k), Y(n_, k);
  for (int j = 0; j < k; ++j) {
    S.col(j) = s_[j];
    Y.col(j) = y_[j];
  }
  W_.resize(n_, 2 * k);
  W_ << Y, theta_ * S;
  const Eigen::MatrixXd SY = S.transpose() * Y;
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(2 * k, 2 * k);
  for (int i = 0; i < k; ++i) {
    K(i, i) = -SY(i, i);
    for (int j = 0; j < i; ++j) {
      K(k + i, j) = SY(i, j);  // L
      K(j, k + i) = SY(i, j);  // L^T
    }
  }
  K.bottomRightCorner(k, k) = theta_ * (S.transpose() * S);
  M_ = K.partialPivLu().inverse();
}

LbfgsbResult lbfgsb_minimize(const LbfgsbObjective& fun, const Eigen::VectorXd& x0,
                             const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                             const LbfgsbOptions& opts, LbfgsbMemory* memory) {
  const int n = static_cast<int>(x0.size());
  LbfgsbResult res;
  res.x = x0.cwiseMax(lower).cwiseMin(upper);
  res.g.resize(n);
  res.f = fun(res.x, res.g);
  res.evaluations = 1;
  if (!std::isfinite(res.f) || !res.g.allFinite())
    throw std::domain_error("lbfgsb: non-finite value at the starting point");
  LbfgsbMemory local(n, opts.memory);
  if (memory && memory->dimension() != n) *memory = LbfgsbMemory(n, opts.memory);
  LbfgsbMemory& mem = memory ? *memory : local;

  Eigen::VectorXd xt(n), gt(n), c;
  bool just_reset = false;
  while (true) {
    res.pg_norm = projected_gradient_norm(res.x, res.g, lower, upper);
    if (res.pg_norm <= opts.pg_tol) {
      res.status = LbfgsbStatus::kConverged;
      break;
    }
    if (res.iterations >= opts.max_iterations) {
      res.status = LbfgsbStatus::kMaxIterations;
      break;
    }
    const Eigen::VectorXd xcp = cauchy_point(res.x, res.g, lower, upper, mem, c);
    Eigen::VectorXd dir = subspace_minimize(res.x, res.g, lower, upper, mem, xcp, c) - res.x;
    double dphi0 = res.g.dot(dir);
    if (!(dphi0 < 0.0)) {
      dir = xcp - res.x;
      dphi0 = res.g.dot(dir);
    }
    if (!(dphi0 < 0.0)) {
      if (mem.size() > 0 && !just_reset) {
        mem.clear();
        just_reset = true;
        continue;
      }
      res.status = LbfgsbStatus::kLineSearchFailed;
      break;
    }

    // Line search on phi(a) = f(x + a dir), a in (0, 1].
    const double f0 = res.f;
    const double eps_f = 1e-10 * (1.0 + std::abs(f0));
    double a = mem.size() == 0 ? std::min(1.0, 1.0 / dir.norm()) : 1.0;
    LinePoint lo{0.0, f0, dphi0};
    LinePoint hi{kInf, kInf, kInf};
    bool have_hi = false, accepted = false, have_lo = false;
    double f_acc = 0.0;
    Eigen::VectorXd x_acc, g_acc;
    for (int ls = 0; ls < opts.max_line_search; ++ls) {
      xt = (res.x + a * dir).cwiseMax(lower).cwiseMin(upper);
      const double ft = fun(xt, gt);
      ++res.evaluations;
      if (!std::isfinite(ft) || !gt.allFinite()) {
        hi = {a, kInf, kInf};
        have_hi = true;
        a = 0.5 * (lo.a + a);
        continue;
      }
      const double dt = gt.dot(dir);
      const bool armijo = ft <= f0 + opts.c1 * a * dphi0;
      const bool approx = ft <= f0 + eps_f && dt <= (2.0 * opts.c1 - 1.0) * dphi0;
      if (!(armijo || approx)) {
        hi = {a, ft, dt};
        have_hi = true;
      } else {
        x_acc = xt;
        g_acc = gt;
        f_acc = ft;
        have_lo = true;
        if (dt >= opts.c2 * dphi0 || a >= 1.0) {
          accepted = true;
          break;
        }
        lo = {a, ft, dt};
      }
      if (!have_hi) {
        a = std::min(1.0, 4.0 * a);
        continue;
      }
      const double width = hi.a - lo.a;
      if (width <= 1e-14 * std::max(1.0, hi.a)) break;
      // Safeguarded quadratic interpolation from lo's value and slope.
      double next = 0.5 * (lo.a + hi.a);
      if (std::isfinite(hi.f)) {
        const double denom = 2.0 * (hi.f - lo.f - lo.d * width);
        if (denom > 0.0) next = lo.a - lo.d * width * width / denom;
      }
      a = std::clamp(next, lo.a + 0.1 * width, hi.a - 0.1 * width);
    }
    if (!accepted && have_lo) accepted = true;  // best sufficient-decrease point
    if (!accepted) {
      if (mem.size() > 0 && !just_reset) {
        mem.clear();
        just_reset = true;
        continue;
      }
      res.status = LbfgsbStatus::kLineSearchFailed;
      break;
    }
    just_reset = false;
    mem.push(x_acc - res.x, g_acc - res.g);
    res.x = x_acc;
    res.g = g_acc;
    res.f = f_acc;
    ++res.iterations;
  }
  return res;
}

}  // namespace ecoroute
