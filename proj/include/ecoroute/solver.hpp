#pragma once

// Augmented-Lagrangian solver for NlpProblem with L-BFGS-B inner solves.
//
//   L_A(z) = f + lambda^T c + rho/2 |c|^2
//            + 1/(2 rho) sum(max(0, mu + rho g)^2 - mu^2)
//
// Bounds stay explicit in the inner problem.

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ecoroute/nlp.hpp"

namespace ecoroute {

struct SolverOptions {
  double kkt_tol = 1e-6;
  int max_outer = 50;
  int max_inner = 500;
  double penalty_init = 10.0;
  double penalty_growth = 10.0;
  double penalty_max = 1e12;
  double multiplier_bound = 1e12;  // safeguard on |lambda|, mu
  double fd_step = 1e-6;           // relative step for derivative checks
  int memory = 10;                 // L-BFGS pairs
  int max_resume = 3;  // consecutive rounds continuing an unfinished inner solve
  // Semismooth Newton on the KKT conditions once the AL iterate has
  // violation <= polish_start. Hessian of the Lagrangian by central
  // differences of exact gradients.
  bool newton_polish = true;
  double polish_start = 1e-3;
  int polish_max_iter = 30;
  std::ostream* log = nullptr;     // one line per outer iteration
};

struct OuterIteration {
  int iter = 0;
  double f = 0.0;
  double ceq_inf = 0.0;
  double cin_viol_inf = 0.0;
  double kkt = 0.0;
  double penalty = 0.0;
  int inner_iterations = 0;
  bool accepted = false;  // multipliers updated after this iteration
  int polish_iterations = 0;
};

struct NlpResult {
  Eigen::VectorXd z;
  Eigen::VectorXd lambda;      // equality multipliers
  Eigen::VectorXd mu;          // inequality multipliers, >= 0
  Eigen::VectorXd bound_mult;  // > 0 at active lower bounds, < 0 at upper
  std::string status;          // optimal | max_iter | infeasible_stationary
  double kkt_residual = 0.0;
  double objective = 0.0;
  int outer_iterations = 0;
  int inner_iterations = 0;
  int polish_iterations = 0;
  int evaluations = 0;
  double wall_time_s = 0.0;
  std::vector<OuterIteration> history;

  bool optimal() const { return status == "optimal"; }
};

/// Optional warm start: any of the vectors may be empty.
struct WarmStart {
  Eigen::VectorXd z;
  Eigen::VectorXd lambda;
  Eigen::VectorXd mu;
};

NlpResult solve(const NlpProblem& problem, const SolverOptions& opts = {},
                const WarmStart& warm = {});

struct KktParts {
  double stationarity = 0.0;     // ||P(z - grad L) - z||_inf
  double equality = 0.0;         // ||c_eq||_inf
  double inequality = 0.0;       // ||max(0, c_in)||_inf
  double complementarity = 0.0;  // max |min(mu, -c_in)|
  double total() const;
};

KktParts kkt_parts(const NlpProblem& problem, const Eigen::VectorXd& z,
                   const Eigen::VectorXd& lambda, const Eigen::VectorXd& mu);
double kkt_residual(const NlpProblem& problem, const Eigen::VectorXd& z,
                    const Eigen::VectorXd& lambda, const Eigen::VectorXd& mu);

/// Machine-readable diagnostics (no iterate vectors).
std::string diagnostics_json(const NlpResult& r);

}  // namespace ecoroute
