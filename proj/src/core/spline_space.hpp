#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "core/knot_vector.hpp"

namespace thbx {

using Vec2 = Eigen::Vector2d;

/// Univariate spline space: knot vector plus precomputed element
/// (non-empty knot span) bookkeeping and Greville anchors.
class SplineSpace1D {
public:
    SplineSpace1D() = default;
    explicit SplineSpace1D(KnotVector kv);

    const KnotVector& kv() const { return kv_; }
    int degree() const { return kv_.degree(); }
    int num_basis() const { return kv_.num_basis(); }
    int num_elements() const { return static_cast<int>(breakpoints_.size()) - 1; }
    const std::vector<double>& breakpoints() const { return breakpoints_; }

    /// Knot-span index of element e.
    int span_of_element(int e) const { return element_span_[static_cast<std::size_t>(e)]; }
    /// Element containing the given knot span (span must be non-empty).
    int element_of_span(int span) const;
    /// Element containing parameter xi (right endpoint maps to the last element).
    int element_of(double xi) const { return element_of_span(kv_.find_span(xi)); }

    std::pair<double, double> element_interval(int e) const {
        return {breakpoints_[static_cast<std::size_t>(e)],
                breakpoints_[static_cast<std::size_t>(e) + 1]};
    }

    /// First basis function supported on element e; functions
    /// first..first+degree are exactly the supported ones.
    int first_basis_on_element(int e) const { return span_of_element(e) - degree(); }

    /// Inclusive element range [lo, hi] touched by basis function i.
    std::pair<int, int> element_range_of_basis(int i) const;

    /// Greville abscissa (anchor) of basis function i.
    double greville(int i) const { return greville_[static_cast<std::size_t>(i)]; }

    bool operator==(const SplineSpace1D& o) const { return kv_ == o.kv_; }

private:
    KnotVector kv_;
    std::vector<double> breakpoints_;
    std::vector<int> element_span_;
    std::vector<double> greville_;
};

/// Tensor-product space of two univariate spaces (u first, v second).
/// Flattened numbering is u-fastest: index = j * nu + i.
class TensorSpace2D {
public:
    TensorSpace2D() = default;
    TensorSpace2D(SplineSpace1D u, SplineSpace1D v) : u_(std::move(u)), v_(std::move(v)) {}

    const SplineSpace1D& u() const { return u_; }
    const SplineSpace1D& v() const { return v_; }

    int num_basis() const { return u_.num_basis() * v_.num_basis(); }
    int num_elements() const { return u_.num_elements() * v_.num_elements(); }

    int flatten(int i, int j) const { return j * u_.num_basis() + i; }
    std::pair<int, int> unflatten(int f) const {
        return {f % u_.num_basis(), f / u_.num_basis()};
    }
    int flatten_elem(int ex, int ey) const { return ey * u_.num_elements() + ex; }
    std::pair<int, int> unflatten_elem(int e) const {
        return {e % u_.num_elements(), e / u_.num_elements()};
    }

    bool operator==(const TensorSpace2D& o) const { return u_ == o.u_ && v_ == o.v_; }

private:
    SplineSpace1D u_;
    SplineSpace1D v_;
};

/// Control net for a curve (1D) or tensor surface (2D), points in R^2.
/// For surfaces the storage matches the tensor flattening (u-fastest).
struct ControlNet {
    std::vector<Vec2> points;
};

/// Curve point C(xi) = sum_i N_i(xi) P_i.
Vec2 eval_curve(const KnotVector& kv, const ControlNet& net, double xi);

/// Surface point S(xi, eta); optionally also the 2x2 Jacobian
/// [dS/dxi, dS/deta] of the map.
Vec2 eval_surface(const TensorSpace2D& ts, const ControlNet& net, double xi, double eta,
                  Eigen::Matrix2d* jacobian = nullptr);

}  // namespace thbx
