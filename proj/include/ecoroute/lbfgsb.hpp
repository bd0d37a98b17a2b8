#pragma once

// Limited-memory BFGS for bound-constrained minimization: generalized Cauchy
// point, subspace minimization on the free variables, projected line search.

#include <deque>
#include <functional>
#include <string>

#include <Eigen/Dense>

namespace ecoroute {

struct LbfgsbOptions {
  int memory = 10;
  int max_iterations = 500;
  double pg_tol = 1e-8;      // stop when ||P(x - g) - x||_inf <= pg_tol
  int max_line_search = 30;
  double c1 = 1e-4;          // sufficient decrease
  double c2 = 0.9;           // curvature
};

enum class LbfgsbStatus { kConverged, kMaxIterations, kLineSearchFailed };

std::string to_string(LbfgsbStatus s);

struct LbfgsbResult {
  Eigen::VectorXd x;
  double f = 0.0;
  Eigen::VectorXd g;
  double pg_norm = 0.0;
  int iterations = 0;
  int evaluations = 0;
  LbfgsbStatus status = LbfgsbStatus::kMaxIterations;
};

/// f(x, g) returns the objective and writes the gradient into g.
using LbfgsbObjective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& g)>;

/// Compact limited-memory matrix B = theta I - W M W^T built from the most
/// recent (s, y) pairs. Can be kept across calls to continue a minimization.
class LbfgsbMemory {
 public:
  LbfgsbMemory(int n, int m);

  int dimension() const { return n_; }
  int size() const { return static_cast<int>(s_.size()); }
  double theta() const { return theta_; }
  const Eigen::MatrixXd& W() const { return W_; }
  const Eigen::MatrixXd& M() const { return M_; }

  void clear();
  /// Returns false (and keeps the memory) when the pair lacks curvature.
  bool push(const Eigen::VectorXd& s, const Eigen::VectorXd& y);

 private:
  void rebuild();

  int n_, m_;
  std::deque<Eigen::VectorXd> s_, y_;
  double theta_ = 1.0;
  Eigen::MatrixXd W_;
  Eigen::MatrixXd M_;
};

/// Projected-gradient infinity norm ||P(x - g) - x||.
double projected_gradient_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& g,
                               const Eigen::VectorXd& lower, const Eigen::VectorXd& upper);

/// Minimizes f over lower <= x <= upper starting from the projection of x0.
/// Infinite bounds are allowed. Deterministic. A non-null `memory` is used
/// as the starting quasi-Newton matrix and holds the final one on return.
LbfgsbResult lbfgsb_minimize(const LbfgsbObjective& f, const Eigen::VectorXd& x0,
                             const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                             const LbfgsbOptions& opts = {},
                             LbfgsbMemory* memory = nullptr);

}  // namespace ecoroute
