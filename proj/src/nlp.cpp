#include "ecoroute/nlp.hpp"

#include <cmath>
#include <stdexcept>

namespace ecoroute {

namespace {

SparseRowMatrix dense_pattern(int rows, int cols) {
  SparseRowMatrix m(rows, cols);
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(rows) * cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) t.emplace_back(i, j, 0.0);
  m.setFromTriplets(t.begin(), t.end());
  m.makeCompressed();
  return m;
}

void fill_dense(SparseRowMatrix& m, const Eigen::MatrixXd& d) {
  if (d.rows() != m.rows() || d.cols() != m.cols())
    throw std::invalid_argument("FunctionNlp: Jacobian has the wrong shape");
  for (int i = 0; i < m.outerSize(); ++i)
    for (SparseRowMatrix::InnerIterator it(m, i); it; ++it)
      it.valueRef() = d(it.row(), it.col());
}

}  // namespace

FunctionNlp::FunctionNlp(Spec spec) : spec_(std::move(spec)) {
  const auto n = spec_.guess.size();
  if (spec_.lower.size() == 0)
    spec_.lower = Eigen::VectorXd::Constant(n, -std::numeric_limits<double>::infinity());
  if (spec_.upper.size() == 0)
    spec_.upper = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
  if (spec_.lower.size() != n || spec_.upper.size() != n)
    throw std::invalid_argument("FunctionNlp: bounds do not match the guess");
  peq_ = dense_pattern(spec_.n_eq, static_cast<int>(n));
  pin_ = dense_pattern(spec_.n_in, static_cast<int>(n));
}

void FunctionNlp::evaluate(const Eigen::VectorXd& z, NlpEval& out,
                           bool derivatives) const {
  out.f = spec_.f(z);
  out.ceq = spec_.n_eq ? spec_.ceq(z) : Eigen::VectorXd();
  out.cin = spec_.n_in ? spec_.cin(z) : Eigen::VectorXd();
  if (!derivatives) return;
  out.grad = spec_.grad(z);
  out.jeq = peq_;
  out.jin = pin_;
  if (spec_.n_eq) fill_dense(out.jeq, spec_.jeq(z));
  if (spec_.n_in) fill_dense(out.jin, spec_.jin(z));
}

// --- ScaledNlp -------------------------------------------------------------

ScaledNlp::ScaledNlp(const NlpProblem& base, Eigen::VectorXd variable_scale,
                     Eigen::VectorXd equality_scale,
                     Eigen::VectorXd inequality_scale, double objective_scale)
    : base_(base),
      dz_(std::move(variable_scale)),
      req_(std::move(equality_scale)),
      rin_(std::move(inequality_scale)),
      fs_(objective_scale) {
  if (dz_.size() != base.num_variables() || req_.size() != base.num_equalities() ||
      rin_.size() != base.num_inequalities())
    throw std::invalid_argument("ScaledNlp: scale vectors do not match the problem");
  if ((dz_.array() <= 0).any() || (req_.array() <= 0).any() ||
      (rin_.array() <= 0).any() || !(fs_ > 0))
    throw std::invalid_argument("ScaledNlp: scales must be positive");
  lower_ = base.lower().cwiseQuotient(dz_);
  upper_ = base.upper().cwiseQuotient(dz_);
}

Eigen::VectorXd ScaledNlp::initial_guess() const {
  return to_scaled(base_.initial_guess());
}

Eigen::VectorXd ScaledNlp::to_scaled(const Eigen::VectorXd& z) const {
  return z.cwiseQuotient(dz_);
}

Eigen::VectorXd ScaledNlp::to_unscaled(const Eigen::VectorXd& zs) const {
  return zs.cwiseProduct(dz_);
}

void ScaledNlp::evaluate(const Eigen::VectorXd& zs, NlpEval& out,
                         bool derivatives) const {
  base_.evaluate(to_unscaled(zs), out, derivatives);
  out.f /= fs_;
  out.ceq.array() /= req_.array();
  out.cin.array() /= rin_.array();
  if (!derivatives) return;
  out.grad = out.grad.cwiseProduct(dz_) / fs_;
  auto rescale = [&](SparseRowMatrix& m, const Eigen::VectorXd& rows) {
    for (int i = 0; i < m.outerSize(); ++i)
      for (SparseRowMatrix::InnerIterator it(m, i); it; ++it)
        it.valueRef() *= dz_[it.col()] / rows[i];
  };
  rescale(out.jeq, req_);
  rescale(out.jin, rin_);
}

double power_of_two_at_least(double x) {
  if (!(x > 0) || !std::isfinite(x))
    throw std::invalid_argument("power_of_two_at_least: need a positive finite value");
  int e = 0;
  const double m = std::frexp(x, &e);  // x = m * 2^e, m in [0.5, 1)
  return m == 0.5 ? x : std::ldexp(1.0, e);
}

// --- Derivative check --------------------------------------------------------

DerivativeCheck check_derivatives(const NlpProblem& problem,
                                  const Eigen::VectorXd& z, double rel_step) {
  const int n = problem.num_variables();
  const int meq = problem.num_equalities();
  const int mi = problem.num_inequalities();
  NlpEval exact;
  problem.evaluate(z, exact, true);
  const Eigen::MatrixXd jeq = Eigen::MatrixXd(exact.jeq);
  const Eigen::MatrixXd jin = Eigen::MatrixXd(exact.jin);

  // Rows of the stacked Jacobian [grad^T; jeq; jin].
  Eigen::MatrixXd exact_all(1 + meq + mi, n);
  exact_all.row(0) = exact.grad.transpose();
  exact_all.middleRows(1, meq) = jeq;
  exact_all.bottomRows(mi) = jin;

  Eigen::MatrixXi in_pattern = Eigen::MatrixXi::Zero(1 + meq + mi, n);
  in_pattern.row(0).setOnes();
  auto mark = [&](const SparseRowMatrix& p, int offset) {
    for (int i = 0; i < p.outerSize(); ++i)
      for (SparseRowMatrix::InnerIterator it(p, i); it; ++it)
        in_pattern(offset + it.row(), it.col()) = 1;
  };
  mark(problem.equality_pattern(), 1);
  mark(problem.inequality_pattern(), 1 + meq);

  Eigen::MatrixXd fd(1 + meq + mi, n);
  NlpEval plus, minus;
  for (int j = 0; j < n; ++j) {
    const double h = rel_step * std::max(1.0, std::abs(z[j]));
    Eigen::VectorXd zp = z, zm = z;
    zp[j] += h;
    zm[j] -= h;
    problem.evaluate(zp, plus, false);
    problem.evaluate(zm, minus, false);
    fd(0, j) = (plus.f - minus.f) / (2 * h);
    fd.col(j).segment(1, meq) = (plus.ceq - minus.ceq) / (2 * h);
    fd.col(j).tail(mi) = (plus.cin - minus.cin) / (2 * h);
  }

  DerivativeCheck out;
  for (int i = 0; i < exact_all.rows(); ++i) {
    const double scale = std::max(exact_all.row(i).cwiseAbs().maxCoeff(), 1e-8);
    for (int j = 0; j < n; ++j) {
      const double err = std::abs(exact_all(i, j) - fd(i, j)) / scale;
      if (!in_pattern(i, j) && std::abs(fd(i, j)) > 1e-7 * std::max(1.0, scale))
        ++out.pattern_violations;
      if (err > out.max_rel_error) {
        out.max_rel_error = err;
        out.worst_row = i - 1;
        out.worst_col = j;
      }
    }
  }
  return out;
}

}  // namespace ecoroute
