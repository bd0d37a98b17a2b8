#pragma once

// Smooth constrained NLP contract shared by the transcription and the solver:
//
//   min f(z)  s.t.  c_eq(z) = 0,  c_in(z) <= 0,  lower <= z <= upper.

#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace ecoroute {

using SparseRowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// One evaluation of every NLP function. The Jacobians keep the sparsity
/// pattern reported by the problem; only their values change.
struct NlpEval {
  double f = 0.0;
  Eigen::VectorXd grad;
  Eigen::VectorXd ceq;
  Eigen::VectorXd cin;
  SparseRowMatrix jeq;
  SparseRowMatrix jin;
};

class NlpProblem {
 public:
  virtual ~NlpProblem() = default;

  virtual int num_variables() const = 0;
  virtual int num_equalities() const = 0;
  virtual int num_inequalities() const = 0;
  virtual const Eigen::VectorXd& lower() const = 0;
  virtual const Eigen::VectorXd& upper() const = 0;
  virtual Eigen::VectorXd initial_guess() const = 0;

  /// Fills `out`. Gradient and Jacobians are only written when `derivatives`
  /// is true. Implementations must be deterministic and thread-safe.
  virtual void evaluate(const Eigen::VectorXd& z, NlpEval& out,
                        bool derivatives) const = 0;

  /// Declared Jacobian structure (values are unspecified).
  virtual const SparseRowMatrix& equality_pattern() const = 0;
  virtual const SparseRowMatrix& inequality_pattern() const = 0;
};

/// Problem defined by callables with dense derivatives; used for small test
/// problems and examples.
class FunctionNlp final : public NlpProblem {
 public:
  using Scalar = std::function<double(const Eigen::VectorXd&)>;
  using Vector = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
  using Matrix = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

  struct Spec {
    Scalar f;
    Vector grad;
    Vector ceq;   // optional
    Matrix jeq;   // optional
    Vector cin;   // optional
    Matrix jin;   // optional
    int n_eq = 0;
    int n_in = 0;
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
    Eigen::VectorXd guess;
  };

  explicit FunctionNlp(Spec spec);

  int num_variables() const override { return static_cast<int>(spec_.guess.size()); }
  int num_equalities() const override { return spec_.n_eq; }
  int num_inequalities() const override { return spec_.n_in; }
  const Eigen::VectorXd& lower() const override { return spec_.lower; }
  const Eigen::VectorXd& upper() const override { return spec_.upper; }
  Eigen::VectorXd initial_guess() const override { return spec_.guess; }
  void evaluate(const Eigen::VectorXd& z, NlpEval& out,
                bool derivatives) const override;
  const SparseRowMatrix& equality_pattern() const override { return peq_; }
  const SparseRowMatrix& inequality_pattern() const override { return pin_; }

 private:
  Spec spec_;
  SparseRowMatrix peq_;
  SparseRowMatrix pin_;
};

/// Diagonal rescaling of another problem: z = D z_s, rows divided by their
/// scales, objective divided by `objective_scale`. With power-of-two scales
/// the mapping is exact in floating point.
class ScaledNlp final : public NlpProblem {
 public:
  ScaledNlp(const NlpProblem& base, Eigen::VectorXd variable_scale,
            Eigen::VectorXd equality_scale, Eigen::VectorXd inequality_scale,
            double objective_scale);

  int num_variables() const override { return base_.num_variables(); }
  int num_equalities() const override { return base_.num_equalities(); }
  int num_inequalities() const override { return base_.num_inequalities(); }
  const Eigen::VectorXd& lower() const override { return lower_; }
  const Eigen::VectorXd& upper() const override { return upper_; }
  Eigen::VectorXd initial_guess() const override;
  void evaluate(const Eigen::VectorXd& z, NlpEval& out,
                bool derivatives) const override;
  const SparseRowMatrix& equality_pattern() const override {
    return base_.equality_pattern();
  }
  const SparseRowMatrix& inequality_pattern() const override {
    return base_.inequality_pattern();
  }

  Eigen::VectorXd to_scaled(const Eigen::VectorXd& z) const;
  Eigen::VectorXd to_unscaled(const Eigen::VectorXd& zs) const;
  const Eigen::VectorXd& variable_scale() const { return dz_; }
  const Eigen::VectorXd& equality_scale() const { return req_; }
  const Eigen::VectorXd& inequality_scale() const { return rin_; }
  double objective_scale() const { return fs_; }

 private:
  const NlpProblem& base_;
  Eigen::VectorXd dz_, req_, rin_;
  double fs_;
  Eigen::VectorXd lower_, upper_;
};

/// Smallest power of two >= x (x > 0).
double power_of_two_at_least(double x);

/// Result of comparing exact derivatives against central differences.
struct DerivativeCheck {
  double max_rel_error = 0.0;    // over objective gradient and all rows
  int worst_row = -1;            // -1 objective, then eq rows, then ineq rows
  int worst_col = -1;
  int pattern_violations = 0;    // FD nonzeros outside the declared pattern
};

/// Central differences with step rel_step * max(1, |z_j|). The error of an
/// entry is |exact - fd| / max(row_norm, 1e-8), where row_norm is the
/// infinity norm of the exact row, so it is relative to the row's magnitude.
DerivativeCheck check_derivatives(const NlpProblem& problem,
                                  const Eigen::VectorXd& z,
                                  double rel_step = 1e-6);

}  // namespace ecoroute
