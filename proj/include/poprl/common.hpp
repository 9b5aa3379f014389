#pragma once

#include <Eigen/Core>

namespace poprl {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Clip every coefficient of `x` into [lo, hi] (per-dimension bounds).
inline Vec clip(const Vec& x, const Vec& lo, const Vec& hi) {
  return x.cwiseMax(lo).cwiseMin(hi);
}

inline double clip(double x, double lo, double hi) {
  return x < lo ? lo : (x > hi ? hi : x);
}

}  // namespace poprl
