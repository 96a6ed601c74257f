#pragma once

#include <Eigen/Dense>

namespace thbx {

/// All degree-p Bernstein polynomial values at u in [0, 1]:
/// B_k(u) = C(p, k) u^k (1-u)^(p-k), k = 0..p.
Eigen::VectorXd bernstein_eval(int p, double u);

/// Values and derivatives up to `order`; row k holds the k-th derivatives.
Eigen::MatrixXd bernstein_derivs(int p, double u, int order);

}  // namespace thbx
