#pragma once

// Scalar helpers shared by the templated model code. Models are written for
// any scalar type `T` that is either double or a forward-mode AutoDiffScalar.

#include <Eigen/Core>
#include <unsupported/Eigen/AutoDiff>

namespace ecoroute {

/// Fixed-width derivative vector; 12 covers the widest constraint block.
/// A fixed width keeps constants (zero derivatives) shape-compatible with
/// variables inside Eigen's AutoDiff expression templates.
inline constexpr int kAdWidth = 12;
using AdVector = Eigen::Matrix<double, kAdWidth, 1>;
using AdScalar = Eigen::AutoDiffScalar<AdVector>;

/// Independent variable number `index` with value `value`.
inline AdScalar ad_variable(double value, int index) {
  AdScalar x(value);
  x.derivatives()[index] = 1.0;
  return x;
}

inline double value_of(double x) { return x; }

template <typename D>
double value_of(const Eigen::AutoDiffScalar<D>& x) {
  return x.value();
}

}  // namespace ecoroute
