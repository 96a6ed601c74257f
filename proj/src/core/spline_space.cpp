#include "core/spline_space.hpp"

#include <algorithm>

#include "core/errors.hpp"

namespace thbx {

SplineSpace1D::SplineSpace1D(KnotVector kv) : kv_(std::move(kv)) {
    const auto& knots = kv_.knots();
    const int p = kv_.degree();
    const int n = kv_.num_basis();
    for (int i = p; i <= n; ++i) {
        if (breakpoints_.empty() || knots[static_cast<std::size_t>(i)] != breakpoints_.back()) {
            breakpoints_.push_back(knots[static_cast<std::size_t>(i)]);
            if (breakpoints_.size() >= 2) element_span_.push_back(i - 1);
        }
    }
    greville_.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        double sum = 0.0;
        for (int k = 1; k <= p; ++k) sum += knots[static_cast<std::size_t>(i + k)];
        greville_[static_cast<std::size_t>(i)] = (p > 0) ? sum / p
                                                         : 0.5 * (knots[static_cast<std::size_t>(i)] +
                                                                  knots[static_cast<std::size_t>(i) + 1]);
    }
}

int SplineSpace1D::element_of_span(int span) const {
    const auto it = std::upper_bound(element_span_.begin(), element_span_.end(), span);
    if (it == element_span_.begin())
        throw internal_error("element_of_span: span below first element");
    return static_cast<int>(it - element_span_.begin()) - 1;
}

std::pair<int, int> SplineSpace1D::element_range_of_basis(int i) const {
    // function i lives on knot spans i..i+p; element_span_ is sorted, so the
    // non-empty ones among them form a contiguous element range
    const int p = degree();
    const auto lo_it = std::lower_bound(element_span_.begin(), element_span_.end(), i);
    const auto hi_it = std::upper_bound(element_span_.begin(), element_span_.end(), i + p);
    if (lo_it == hi_it) throw internal_error("element_range_of_basis: empty support");
    return {static_cast<int>(lo_it - element_span_.begin()),
            static_cast<int>(hi_it - element_span_.begin()) - 1};
}

Vec2 eval_curve(const KnotVector& kv, const ControlNet& net, double xi) {
    if (static_cast<int>(net.points.size()) != kv.num_basis())
        throw validation_error("eval_curve: control net size " +
                               std::to_string(net.points.size()) +
                               " does not match basis count " + std::to_string(kv.num_basis()));
    double N[KnotVector::max_degree + 1];
    const int span = kv.eval_basis(xi, N);
    Vec2 c = Vec2::Zero();
    for (int k = 0; k <= kv.degree(); ++k)
        c += N[k] * net.points[static_cast<std::size_t>(span - kv.degree() + k)];
    return c;
}

Vec2 eval_surface(const TensorSpace2D& ts, const ControlNet& net, double xi, double eta,
                  Eigen::Matrix2d* jacobian) {
    if (static_cast<int>(net.points.size()) != ts.num_basis())
        throw validation_error("eval_surface: control net size " +
                               std::to_string(net.points.size()) +
                               " does not match basis count " + std::to_string(ts.num_basis()));
    const KnotVector& ku = ts.u().kv();
    const KnotVector& kv = ts.v().kv();
    Vec2 s = Vec2::Zero();
    if (!jacobian) {
        double Nu[KnotVector::max_degree + 1];
        double Nv[KnotVector::max_degree + 1];
        const int su = ku.eval_basis(xi, Nu);
        const int sv = kv.eval_basis(eta, Nv);
        for (int b = 0; b <= kv.degree(); ++b)
            for (int a = 0; a <= ku.degree(); ++a) {
                const int idx = ts.flatten(su - ku.degree() + a, sv - kv.degree() + b);
                s += Nu[a] * Nv[b] * net.points[static_cast<std::size_t>(idx)];
            }
        return s;
    }
    Eigen::MatrixXd du, dv;
    const int su = ku.eval_basis_derivs(xi, 1, du);
    const int sv = kv.eval_basis_derivs(eta, 1, dv);
    Vec2 d_xi = Vec2::Zero();
    Vec2 d_eta = Vec2::Zero();
    for (int b = 0; b <= kv.degree(); ++b)
        for (int a = 0; a <= ku.degree(); ++a) {
            const int idx = ts.flatten(su - ku.degree() + a, sv - kv.degree() + b);
            const Vec2& P = net.points[static_cast<std::size_t>(idx)];
            s += du(0, a) * dv(0, b) * P;
            d_xi += du(1, a) * dv(0, b) * P;
            d_eta += du(0, a) * dv(1, b) * P;
        }
    jacobian->col(0) = d_xi;
    jacobian->col(1) = d_eta;
    return s;
}

}  // namespace thbx
