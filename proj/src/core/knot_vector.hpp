#pragma once

#include <vector>

#include <Eigen/Dense>

namespace thbx {

/// Clamped (open) knot vector plus polynomial degree. The atom of all basis
/// evaluation: owns the Cox-de Boor recursion and its derivatives.
///
/// Invariants enforced by validate():
///  - knots non-decreasing,
///  - first and last knot each of multiplicity degree+1 (clamped),
///  - at least degree+1 basis functions,
///  - interior multiplicities <= degree (continuity stays >= C0).
class KnotVector {
public:
    static constexpr int max_degree = 8;

    KnotVector() = default;
    KnotVector(std::vector<double> knots, int degree);

    int degree() const { return degree_; }
    const std::vector<double>& knots() const { return knots_; }
    double knot(int i) const { return knots_[static_cast<std::size_t>(i)]; }

    /// Number of basis functions n = #knots - degree - 1.
    int num_basis() const { return static_cast<int>(knots_.size()) - degree_ - 1; }

    double domain_min() const { return knots_[static_cast<std::size_t>(degree_)]; }
    double domain_max() const { return knots_[static_cast<std::size_t>(num_basis())]; }

    /// Knot-span index i with knot(i) <= xi < knot(i+1). The right endpoint
    /// maps to the last non-empty span so evaluation at xi = domain_max works.
    /// Throws validation_error for xi outside [domain_min, domain_max].
    int find_span(double xi) const;

    /// The degree+1 non-zero basis values on the span containing xi.
    /// Returns the span index; values are written to out[0..degree].
    int eval_basis(double xi, double* out) const;

    /// Values and derivatives up to `order` (order <= degree required).
    /// Row k of the result holds the k-th derivatives of the degree+1
    /// functions supported on the span. Returns the span index.
    int eval_basis_derivs(double xi, int order, Eigen::MatrixXd& ders) const;

    /// Multiplicity of the value `u` inside the knot sequence (0 if absent).
    int multiplicity(double u) const;

    bool operator==(const KnotVector& other) const {
        return degree_ == other.degree_ && knots_ == other.knots_;
    }

private:
    void validate() const;

    std::vector<double> knots_;
    int degree_ = 0;
};

/// Uniform clamped knot vector on [a, b] with `num_elements` equal spans.
KnotVector make_uniform_knots(int degree, int num_elements, double a = 0.0, double b = 1.0);

}  // namespace thbx
