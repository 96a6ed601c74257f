#pragma once

#include <vector>

namespace thbx {

/// Gauss-Legendre rule on [0, 1], exact for polynomials of degree 2n-1.
struct GaussRule1D {
    std::vector<double> points;
    std::vector<double> weights;
};

/// n-point rule on [0, 1]; 1 <= n <= 16. Nodes via Newton iteration on the
/// Legendre polynomials, accurate to machine precision and deterministic.
const GaussRule1D& gauss_rule_1d(int n);

/// Tensor-product rule on [0, 1]^2 with n points per direction.
struct GaussRule2D {
    std::vector<double> u;
    std::vector<double> v;
    std::vector<double> w;
    int size() const { return static_cast<int>(w.size()); }
};

GaussRule2D gauss_rule(int n);

}  // namespace thbx
