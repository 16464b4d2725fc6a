#pragma once

#include <Eigen/Core>

#include <cmath>

namespace maxent {

/// x ln x with the 0 ln 0 = 0 convention.
template <typename Scalar>
Scalar xlogx(Scalar x) {
  using std::log;
  return x > Scalar(0) ? x * log(x) : Scalar(0);
}

template <typename Scalar>
Scalar xlog2x(Scalar x) {
  using std::log2;
  return x > Scalar(0) ? x * log2(x) : Scalar(0);
}

/// Binary entropy in bits.
template <typename Scalar>
Scalar binary_entropy(Scalar p) {
  return -xlog2x(p) - xlog2x(Scalar(1) - p);
}

/// Shannon entropy (bits) of a probability vector.
template <typename Derived>
typename Derived::Scalar entropy_bits(const Eigen::MatrixBase<Derived>& dist) {
  using Scalar = typename Derived::Scalar;
  Scalar h(0);
  for (Eigen::Index i = 0; i < dist.size(); ++i) h -= xlog2x(dist(i));
  return h;
}

/// Convex upper surrogate of -x*y built from the split
///   -x*y = (x-y)^2/4 - (x+y)^2/4
/// with the concave part linearized at (x_hat, y_hat). Exact at the
/// expansion point and never below -x*y.
template <typename Scalar>
Scalar bilinear_surrogate(Scalar x, Scalar y, Scalar x_hat, Scalar y_hat) {
  const Scalar d = x - y;
  const Scalar s_hat = x_hat + y_hat;
  return Scalar(0.25) * d * d - Scalar(0.25) * s_hat * s_hat -
         Scalar(0.5) * s_hat * ((x + y) - s_hat);
}

}  // namespace maxent
