#include "core/bernstein.hpp"

#include "core/errors.hpp"
#include "core/knot_vector.hpp"

namespace thbx {

Eigen::VectorXd bernstein_eval(int p, double u) {
    if (p < 0 || p > KnotVector::max_degree)
        throw validation_error("bernstein_eval: degree must be in [0, 8]");
    if (u < 0.0 || u > 1.0)
        throw validation_error("bernstein_eval: argument must lie in [0, 1]");
    // de Casteljau-style triangular accumulation, stable and exact at the ends
    Eigen::VectorXd b = Eigen::VectorXd::Zero(p + 1);
    b[0] = 1.0;
    const double u1 = 1.0 - u;
    for (int j = 1; j <= p; ++j) {
        double saved = 0.0;
        for (int k = 0; k < j; ++k) {
            const double temp = b[k];
            b[k] = saved + u1 * temp;
            saved = u * temp;
        }
        b[j] = saved;
    }
    return b;
}

Eigen::MatrixXd bernstein_derivs(int p, double u, int order) {
    if (order < 0)
        throw validation_error("bernstein_derivs: order must be non-negative");
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(order + 1, p + 1);
    out.row(0) = bernstein_eval(p, u).transpose();
    // B'_{k,p} = p (B_{k-1,p-1} - B_{k,p-1}), iterated for higher orders
    for (int d = 1; d <= order; ++d) {
        if (d > p) break;  // higher derivatives vanish
        const Eigen::MatrixXd lower = bernstein_derivs(p - 1, u, d - 1);
        for (int k = 0; k <= p; ++k) {
            const double bl = (k >= 1) ? lower(d - 1, k - 1) : 0.0;
            const double br = (k <= p - 1) ? lower(d - 1, k) : 0.0;
            out(d, k) = p * (bl - br);
        }
    }
    return out;
}

}  // namespace thbx
