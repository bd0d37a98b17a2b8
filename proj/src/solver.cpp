#include "ecoroute/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "ecoroute/lbfgsb.hpp"

namespace ecoroute {

double KktParts::total() const {
  return std::max({stationarity, equality, inequality, complementarity});
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double inf_norm(const Eigen::VectorXd& v) {
  return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0;
}

double positive_part_norm(const Eigen::VectorXd& v) {
  return v.size() ? v.cwiseMax(0.0).maxCoeff() : 0.0;
}

Eigen::VectorXd lagrangian_gradient(const NlpEval& ev, const Eigen::VectorXd& lambda,
                                    const Eigen::VectorXd& mu) {
  Eigen::VectorXd g = ev.grad;
  if (lambda.size()) g += ev.jeq.transpose() * lambda;
  if (mu.size()) g += ev.jin.transpose() * mu;
  return g;
}

KktParts parts_from(const NlpProblem& p, const NlpEval& ev, const Eigen::VectorXd& z,
                    const Eigen::VectorXd& lambda, const Eigen::VectorXd& mu) {
  KktParts k;
  k.stationarity = projected_gradient_norm(z, lagrangian_gradient(ev, lambda, mu), p.lower(),
                                           p.upper());
  k.equality = inf_norm(ev.ceq);
  k.inequality = positive_part_norm(ev.cin);
  for (int i = 0; i < mu.size(); ++i)
    k.complementarity = std::max(k.complementarity, std::abs(std::min(mu[i], -ev.cin[i])));
  return k;
}

// Squared 2-norm of the KKT residual vector; smooth enough for backtracking.
double kkt_merit(const NlpProblem& p, const NlpEval& ev, const Eigen::VectorXd& z,
                 const Eigen::VectorXd& lambda, const Eigen::VectorXd& mu) {
  const Eigen::VectorXd g = lagrangian_gradient(ev, lambda, mu);
  const Eigen::VectorXd st = (z - g).cwiseMax(p.lower()).cwiseMin(p.upper()) - z;
  double m = st.squaredNorm() + ev.ceq.squaredNorm();
  for (int i = 0; i < mu.size(); ++i) m += std::pow(std::min(mu[i], -ev.cin[i]), 2);
  return m;
}

// Semismooth Newton on z - P(z - grad L) = 0, c_eq = 0, min(mu, -c_in) = 0.
// The active sets come from the nonsmooth terms at the current iterate;
// steps are accepted when the KKT residual decreases. Updates z, lambda, mu
// in place with the best point found and returns the iteration count.
int newton_polish(const NlpProblem& p, const SolverOptions& opts, Eigen::VectorXd& z,
                  Eigen::VectorXd& lambda, Eigen::VectorXd& mu, int& evaluations) {
  const int n = p.num_variables();
  const int meq = p.num_equalities();
  const int mi = p.num_inequalities();
  const auto& lo = p.lower();
  const auto& hi = p.upper();

  NlpEval ev, ep, em;
  p.evaluate(z, ev, true);
  ++evaluations;
  double best = parts_from(p, ev, z, lambda, mu).total();
  double merit = kkt_merit(p, ev, z, lambda, mu);
  Eigen::VectorXd best_z = z, best_lambda = lambda, best_mu = mu;

  double shift = 1e-6;
  int it = 0;
  for (; it < opts.polish_max_iter && best > opts.kkt_tol; ++it) {
    std::vector<int> free_vars, active;
    Eigen::VectorXd dz = Eigen::VectorXd::Zero(n);
    const Eigen::VectorXd gl = lagrangian_gradient(ev, lambda, mu);
    for (int i = 0; i < n; ++i) {
      const double t = z[i] - gl[i];
      if (lo[i] == hi[i] || t <= lo[i])
        dz[i] = lo[i] - z[i];
      else if (t >= hi[i])
        dz[i] = hi[i] - z[i];
      else
        free_vars.push_back(i);
    }
    for (int k = 0; k < mi; ++k)
      if (mu[k] > -ev.cin[k]) active.push_back(k);
    const int nf = static_cast<int>(free_vars.size());
    const int na = static_cast<int>(active.size());

    // Hessian columns of the Lagrangian for the free variables. The coupling
    // to fixed variables is dropped; their step is zero once they sit on
    // their bound.
    Eigen::MatrixXd H(nf, nf);
    for (int c = 0; c < nf; ++c) {
      const int j = free_vars[c];
      const double h = 1e-5 * std::max(1.0, std::abs(z[j]));
      Eigen::VectorXd zp = z, zm = z;
      zp[j] += h;
      zm[j] -= h;
      p.evaluate(zp, ep, true);
      p.evaluate(zm, em, true);
      evaluations += 2;
      const Eigen::VectorXd col =
          (lagrangian_gradient(ep, lambda, mu) - lagrangian_gradient(em, lambda, mu)) / (2 * h);
      for (int r = 0; r < nf; ++r) H(r, c) = col[free_vars[r]];
    }
    H = (0.5 * (H + H.transpose())).eval();

    const Eigen::MatrixXd jeq = Eigen::MatrixXd(ev.jeq);
    const Eigen::MatrixXd jin = Eigen::MatrixXd(ev.jin);
    Eigen::VectorXd gla = ev.grad;
    if (meq) gla += jeq.transpose() * lambda;
    for (int k : active) gla += jin.row(k).transpose() * mu[k];

    const int m = nf + meq + na;
    Eigen::MatrixXd K0 = Eigen::MatrixXd::Zero(m, m);
    Eigen::VectorXd rhs(m);
    K0.topLeftCorner(nf, nf) = H;
    for (int c = 0; c < nf; ++c) rhs[c] = -gla[free_vars[c]];
    for (int r = 0; r < meq; ++r) {
      rhs[nf + r] = -ev.ceq[r] - jeq.row(r).dot(dz);
      for (int c = 0; c < nf; ++c) K0(nf + r, c) = K0(c, nf + r) = jeq(r, free_vars[c]);
    }
    for (int a = 0; a < na; ++a) {
      const int k = active[a];
      rhs[nf + meq + a] = -ev.cin[k] - jin.row(k).dot(dz);
      for (int c = 0; c < nf; ++c) K0(nf + meq + a, c) = K0(c, nf + meq + a) = jin(k, free_vars[c]);
    }
    // Tiny dual shift covers degenerate active sets.
    for (int r = nf; r < m; ++r) K0(r, r) = -1e-12;

    // Levenberg-Marquardt primal shift, then backtracking along the
    // projected path on the 2-norm merit. The problem is nearly linear in
    // some controls, so plain Newton steps run far along flat directions.
    bool moved = false;
    for (; shift <= 1e4 && !moved; shift *= 10) {
      Eigen::MatrixXd K = K0;
      for (int r = 0; r < nf; ++r) K(r, r) += shift;
      const Eigen::VectorXd d = K.partialPivLu().solve(rhs);
      if (!d.allFinite()) continue;
      for (double alpha = 1.0; alpha >= 0.125 && !moved; alpha *= 0.5) {
        Eigen::VectorXd step = dz;
        for (int c = 0; c < nf; ++c) step[free_vars[c]] = alpha * d[c];
        Eigen::VectorXd mt = Eigen::VectorXd::Zero(mi);
        for (int a = 0; a < na; ++a)
          mt[active[a]] = std::max(0.0, mu[active[a]] + alpha * d[nf + meq + a]);
        const Eigen::VectorXd zt = (z + step).cwiseMax(lo).cwiseMin(hi);
        const Eigen::VectorXd lt = lambda + alpha * d.segment(nf, meq);
        try {
          p.evaluate(zt, ep, true);
        } catch (const std::domain_error&) {
          continue;
        }
        ++evaluations;
        const double mt_merit = kkt_merit(p, ep, zt, lt, mt);
        if (!(mt_merit < (1.0 - 1e-4 * alpha) * merit)) continue;
        z = zt;
        lambda = lt;
        mu = mt;
        merit = mt_merit;
        std::swap(ev, ep);
        moved = true;
        const double total = parts_from(p, ev, z, lambda, mu).total();
        if (total < best) {
          best = total;
          best_z = z;
          best_lambda = lambda;
          best_mu = mu;
        }
      }
    }
    shift = std::max(shift / 100, 1e-12);
    if (!moved) break;
  }
  z = best_z;
  lambda = best_lambda;
  mu = best_mu;
  return it;
}

// Multipliers minimizing the stationarity residual over variables strictly
// inside their bounds, with the nearly active inequalities; mu clipped at 0.
// Large penalties make lambda + rho c noisy, this estimate is not.
void least_squares_multipliers(const NlpProblem& p, const NlpEval& ev, const Eigen::VectorXd& z,
                               Eigen::VectorXd& lambda, Eigen::VectorXd& mu) {
  const auto& lo = p.lower();
  const auto& hi = p.upper();
  std::vector<int> free_vars, active;
  for (int i = 0; i < z.size(); ++i)
    if (z[i] > lo[i] && z[i] < hi[i]) free_vars.push_back(i);
  for (int k = 0; k < ev.cin.size(); ++k)
    if (ev.cin[k] > -1e-6) active.push_back(k);
  const int nf = static_cast<int>(free_vars.size());
  const int meq = static_cast<int>(ev.ceq.size());
  const int na = static_cast<int>(active.size());
  lambda = Eigen::VectorXd::Zero(meq);
  mu = Eigen::VectorXd::Zero(ev.cin.size());
  if (nf == 0 || meq + na == 0) return;
  std::vector<int> pos(z.size(), -1);
  for (int r = 0; r < nf; ++r) pos[free_vars[r]] = r;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(nf, meq + na);
  Eigen::VectorXd g(nf);
  for (int r = 0; r < nf; ++r) g[r] = ev.grad[free_vars[r]];
  for (int i = 0; i < meq; ++i)
    for (SparseRowMatrix::InnerIterator it(ev.jeq, i); it; ++it)
      if (pos[it.col()] >= 0) A(pos[it.col()], i) = it.value();
  for (int a = 0; a < na; ++a)
    for (SparseRowMatrix::InnerIterator it(ev.jin, active[a]); it; ++it)
      if (pos[it.col()] >= 0) A(pos[it.col()], meq + a) = it.value();
  const Eigen::VectorXd y = A.completeOrthogonalDecomposition().solve(-g);
  lambda = y.head(meq);
  for (int a = 0; a < na; ++a) mu[active[a]] = std::max(0.0, y[meq + a]);
}

Eigen::VectorXd sized_or_zero(const Eigen::VectorXd& v, int n) {
  return v.size() == n ? v : Eigen::VectorXd::Zero(n);
}

}  // namespace

KktParts kkt_parts(const NlpProblem& problem, const Eigen::VectorXd& z,
                   const Eigen::VectorXd& lambda, const Eigen::VectorXd& mu) {
  NlpEval ev;
  problem.evaluate(z, ev, true);
  return parts_from(problem, ev, z, lambda, mu);
}

double kkt_residual(const NlpProblem& problem, const Eigen::VectorXd& z,
                    const Eigen::VectorXd& lambda, const Eigen::VectorXd& mu) {
  return kkt_parts(problem, z, lambda, mu).total();
}

NlpResult solve(const NlpProblem& problem, const SolverOptions& opts, const WarmStart& warm) {
  const auto t0 = std::chrono::steady_clock::now();
  const int n = problem.num_variables();
  const int meq = problem.num_equalities();
  const int min_ = problem.num_inequalities();
  const auto& lo = problem.lower();
  const auto& hi = problem.upper();

  NlpResult res;
  res.z = (warm.z.size() == n ? warm.z : problem.initial_guess()).cwiseMax(lo).cwiseMin(hi);
  res.lambda = sized_or_zero(warm.lambda, meq);
  res.mu = sized_or_zero(warm.mu, min_).cwiseMax(0.0);
  if (!res.z.allFinite()) throw std::domain_error("solve: non-finite initial point");

  double rho = opts.penalty_init;
  const double floor_tol = 0.1 * opts.kkt_tol;
  double omega = std::max(1.0 / rho, floor_tol);
  double eta = std::max(std::pow(rho, -0.1), floor_tol);
  double accepted_eq = kInf;

  NlpEval ev;
  int evaluations = 0;
  auto augmented = [&](const Eigen::VectorXd& z, Eigen::VectorXd& g) {
    problem.evaluate(z, ev, true);
    ++evaluations;
    const Eigen::VectorXd lam = res.lambda + rho * ev.ceq;
    const Eigen::VectorXd mu = (res.mu + rho * ev.cin).cwiseMax(0.0);
    const double value = ev.f + res.lambda.dot(ev.ceq) + 0.5 * rho * ev.ceq.squaredNorm() +
                         (mu.squaredNorm() - res.mu.squaredNorm()) / (2.0 * rho);
    g = lagrangian_gradient(ev, lam, mu);
    return value;
  };

  LbfgsbMemory memory(n, opts.memory);
  bool keep_memory = false;
  int resumes = 0;
  if (opts.log) *opts.log << "# iter, f, ||ceq||_inf, ||cineq_viol||_inf, kkt, penalty\n";
  res.status = "max_iter";
  for (int outer = 1; outer <= opts.max_outer; ++outer) {
    if (!keep_memory) memory.clear();
    keep_memory = false;
    LbfgsbOptions inner;
    inner.pg_tol = omega;
    inner.max_iterations = opts.max_inner;
    inner.memory = opts.memory;
    const auto r = lbfgsb_minimize(augmented, res.z, lo, hi, inner, &memory);
    res.z = r.x;
    res.inner_iterations += r.iterations;
    res.outer_iterations = outer;

    problem.evaluate(res.z, ev, true);
    ++evaluations;
    Eigen::VectorXd lam_new = res.lambda + rho * ev.ceq;
    Eigen::VectorXd mu_new = (res.mu + rho * ev.cin).cwiseMax(0.0);
    KktParts parts = parts_from(problem, ev, res.z, lam_new, mu_new);
    double viol = std::max(parts.equality, parts.inequality);
    int polish = 0;
    if (opts.newton_polish && viol <= opts.polish_start && parts.total() > opts.kkt_tol) {
      Eigen::VectorXd lam_ls, mu_ls;
      least_squares_multipliers(problem, ev, res.z, lam_ls, mu_ls);
      if (parts_from(problem, ev, res.z, lam_ls, mu_ls).total() < parts.total()) {
        lam_new = lam_ls;
        mu_new = mu_ls;
      }
      polish = newton_polish(problem, opts, res.z, lam_new, mu_new, evaluations);
      problem.evaluate(res.z, ev, true);
      ++evaluations;
      parts = parts_from(problem, ev, res.z, lam_new, mu_new);
      viol = std::max(parts.equality, parts.inequality);
      res.polish_iterations += polish;
    }

    OuterIteration log;
    log.iter = outer;
    log.f = ev.f;
    log.ceq_inf = parts.equality;
    log.cin_viol_inf = parts.inequality;
    log.kkt = parts.total();
    log.penalty = rho;
    log.inner_iterations = r.iterations;
    log.polish_iterations = polish;
    res.kkt_residual = log.kkt;

    const bool optimal = parts.total() <= opts.kkt_tol;
    const bool unfinished = r.status == LbfgsbStatus::kMaxIterations && r.pg_norm > omega;
    if (optimal) {
      res.lambda = lam_new;
      res.mu = mu_new;
      log.accepted = true;
    } else if (unfinished && !polish && resumes < opts.max_resume) {
      // Inner budget exhausted: resume the same subproblem next round with
      // the quasi-Newton memory kept.
      keep_memory = true;
      ++resumes;
    } else if (viol <= eta && parts.equality <= std::max(accepted_eq, floor_tol)) {
      res.lambda = lam_new.cwiseMax(-opts.multiplier_bound).cwiseMin(opts.multiplier_bound);
      res.mu = mu_new.cwiseMin(opts.multiplier_bound);
      accepted_eq = parts.equality;
      eta = std::max(eta / std::pow(rho, 0.9), floor_tol);
      omega = std::max(omega / rho, floor_tol);
      log.accepted = true;
    } else if (rho < opts.penalty_max) {
      rho = std::min(rho * opts.penalty_growth, opts.penalty_max);
      omega = std::max(1.0 / rho, floor_tol);
      eta = std::max(std::pow(rho, -0.1), floor_tol);
    } else if (r.status != LbfgsbStatus::kMaxIterations) {
      // Largest penalty reached and the inner problem is stationary while
      // the constraints stay violated.
      res.history.push_back(log);
      res.status = "infeasible_stationary";
      break;
    }
    if (!keep_memory) resumes = 0;
    res.history.push_back(log);
    if (opts.log) {
      char line[160];
      std::snprintf(line, sizeof line, "%d, %.12e, %.3e, %.3e, %.3e, %.1e\n", log.iter, log.f,
                    log.ceq_inf, log.cin_viol_inf, log.kkt, log.penalty);
      *opts.log << line << std::flush;
    }
    if (optimal) {
      res.status = "optimal";
      break;
    }
  }

  problem.evaluate(res.z, ev, true);
  ++evaluations;
  res.objective = ev.f;
  const Eigen::VectorXd gl = lagrangian_gradient(ev, res.lambda, res.mu);
  res.bound_mult = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i)
    if (res.z[i] <= lo[i] || res.z[i] >= hi[i]) res.bound_mult[i] = gl[i];
  res.evaluations = evaluations;
  res.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

std::string diagnostics_json(const NlpResult& r) {
  nlohmann::json j;
  j["status"] = r.status;
  j["kkt_residual"] = r.kkt_residual;
  j["objective"] = r.objective;
  j["outer_iterations"] = r.outer_iterations;
  j["inner_iterations"] = r.inner_iterations;
  j["polish_iterations"] = r.polish_iterations;
  j["evaluations"] = r.evaluations;
  j["wall_time_s"] = r.wall_time_s;
  auto& h = j["history"] = nlohmann::json::array();
  for (const auto& it : r.history)
    h.push_back({{"iter", it.iter},
                 {"f", it.f},
                 {"ceq_inf", it.ceq_inf},
                 {"cin_viol_inf", it.cin_viol_inf},
                 {"kkt", it.kkt},
                 {"penalty", it.penalty},
                 {"inner_iterations", it.inner_iterations},
                 {"polish_iterations", it.polish_iterations},
                 {"accepted", it.accepted}});
  return j.dump(2) + "\n";
}

}  // namespace ecoroute
