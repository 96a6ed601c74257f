#pragma once

#include <vector>

#include <Eigen/Dense>

#include "core/spline_space.hpp"

namespace thbx {

/// Dense operator expressing target basis functions as combinations of
/// source basis functions: target_values = mat * source_values pointwise.
/// Rows index target functions, columns index source functions; the
/// optional index maps tie local rows/columns to a global numbering.
///
/// For a target set forming a partition of unity every column sums to 1,
/// and all entries of subdivision / Bezier extraction operators are >= 0.
struct ExtractionOperator {
    Eigen::MatrixXd mat;
    std::vector<int> row_index;
    std::vector<int> col_index;

    int rows() const { return static_cast<int>(mat.rows()); }
    int cols() const { return static_cast<int>(mat.cols()); }
};

/// Inserts the given knots (values inside the open domain, any order) and
/// returns the refined knot vector. If `transfer` is non-null it receives
/// the (coarse x fine) operator T with N_coarse(xi) = T * N_fine(xi); the
/// same T maps fine control points from coarse ones via P_fine = T^T P.
/// Throws validation_error if a resulting interior multiplicity would
/// exceed the degree.
KnotVector insert_knots(const KnotVector& kv, const std::vector<double>& new_knots,
                        ExtractionOperator* transfer = nullptr);

/// One dyadic refinement: every non-empty span split at its midpoint.
KnotVector dyadic_refine(const KnotVector& kv);

/// Subdivision matrix S for one dyadic step: row i holds the coefficients
/// expressing coarse function i in the midpoint-refined basis.
ExtractionOperator subdivision_matrix(const SplineSpace1D& coarse);

/// Per-element Bezier extraction operators E^e ((p+1) x (p+1) each):
/// N|_e = E^e B with B the local Bernstein basis of the element. Computed
/// by knot insertion up to interior multiplicity p (Bezier decomposition).
std::vector<Eigen::MatrixXd> bezier_extraction(const SplineSpace1D& space);

}  // namespace thbx
