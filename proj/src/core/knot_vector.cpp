#include "core/knot_vector.hpp"

#include <algorithm>
#include <cmath>

#include "core/errors.hpp"

namespace thbx {

KnotVector::KnotVector(std::vector<double> knots, int degree)
    : knots_(std::move(knots)), degree_(degree) {
    validate();
}

void KnotVector::validate() const {
    if (degree_ < 0 || degree_ > max_degree)
        throw validation_error("knot vector: degree must be in [0, 8], got " +
                               std::to_string(degree_));
    const int n = num_basis();
    if (n < degree_ + 1)
        throw validation_error("knot vector: needs at least degree+1 basis functions, got n=" +
                               std::to_string(n));
    for (std::size_t i = 1; i < knots_.size(); ++i)
        if (knots_[i] < knots_[i - 1])
            throw validation_error("knot vector: knots must be non-decreasing");
    // clamped ends: multiplicity degree+1 at both endpoints
    if (knots_.front() != knots_[static_cast<std::size_t>(degree_)])
        throw validation_error("knot vector: not clamped at the left end");
    if (knots_.back() != knots_[static_cast<std::size_t>(n)])
        throw validation_error("knot vector: not clamped at the right end");
    if (knots_.front() == knots_.back())
        throw validation_error("knot vector: empty parametric domain");
    // interior multiplicities <= degree (<= 1 for piecewise constants)
    const int max_mult = std::max(degree_, 1);
    int run = 1;
    for (int i = degree_ + 1; i < n; ++i) {
        run = (knots_[static_cast<std::size_t>(i)] == knots_[static_cast<std::size_t>(i - 1)])
                  ? run + 1
                  : 1;
        if (knots_[static_cast<std::size_t>(i)] != knots_.front() &&
            knots_[static_cast<std::size_t>(i)] != knots_.back() && run > max_mult)
            throw validation_error("knot vector: interior knot multiplicity exceeds degree");
    }
}

int KnotVector::find_span(double xi) const {
    const int n = num_basis();
    if (xi < domain_min() || xi > domain_max())
        throw validation_error("find_span: parameter " + std::to_string(xi) +
                               " outside knot domain [" + std::to_string(domain_min()) + ", " +
                               std::to_string(domain_max()) + "]");
    if (xi >= knot(n)) {
        // right-endpoint convention: last non-empty span
        int s = n - 1;
        while (s > degree_ && knot(s) == knot(s + 1)) --s;
        return s;
    }
    const auto begin = knots_.begin() + degree_;
    const auto end = knots_.begin() + n + 1;
    const auto it = std::upper_bound(begin, end, xi);
    return static_cast<int>(it - knots_.begin()) - 1;
}

int KnotVector::eval_basis(double xi, double* out) const {
    const int span = find_span(xi);
    const int p = degree_;
    double left[max_degree + 1];
    double right[max_degree + 1];
    out[0] = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[j] = xi - knot(span + 1 - j);
        right[j] = knot(span + j) - xi;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            const double temp = out[r] / (right[r + 1] + left[j - r]);
            out[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        out[j] = saved;
    }
    return span;
}

int KnotVector::eval_basis_derivs(double xi, int order, Eigen::MatrixXd& ders) const {
    const int p = degree_;
    if (order < 0 || order > p)
        throw validation_error("eval_basis_derivs: order must be in [0, degree], got " +
                               std::to_string(order));
    const int span = find_span(xi);

    // Cox-de Boor with the full triangular table of lower-degree values,
    // then derivative coefficients from inverted knot differences.
    Eigen::MatrixXd ndu(p + 1, p + 1);
    double left[max_degree + 1];
    double right[max_degree + 1];
    ndu(0, 0) = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[j] = xi - knot(span + 1 - j);
        right[j] = knot(span + j) - xi;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            ndu(j, r) = right[r + 1] + left[j - r];
            const double temp = ndu(r, j - 1) / ndu(j, r);
            ndu(r, j) = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu(j, j) = saved;
    }

    ders.setZero(order + 1, p + 1);
    for (int j = 0; j <= p; ++j) ders(0, j) = ndu(j, p);

    Eigen::MatrixXd a(2, p + 1);
    for (int r = 0; r <= p; ++r) {
        int s1 = 0;
        int s2 = 1;
        a(0, 0) = 1.0;
        for (int k = 1; k <= order; ++k) {
            double d = 0.0;
            const int rk = r - k;
            const int pk = p - k;
            if (r >= k) {
                a(s2, 0) = a(s1, 0) / ndu(pk + 1, rk);
                d = a(s2, 0) * ndu(rk, pk);
            }
            const int j1 = (rk >= -1) ? 1 : -rk;
            const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
            for (int j = j1; j <= j2; ++j) {
                a(s2, j) = (a(s1, j) - a(s1, j - 1)) / ndu(pk + 1, rk + j);
                d += a(s2, j) * ndu(rk + j, pk);
            }
            if (r <= pk) {
                a(s2, k) = -a(s1, k - 1) / ndu(pk + 1, r);
                d += a(s2, k) * ndu(r, pk);
            }
            ders(k, r) = d;
            std::swap(s1, s2);
        }
    }

    double factor = p;
    for (int k = 1; k <= order; ++k) {
        for (int j = 0; j <= p; ++j) ders(k, j) *= factor;
        factor *= (p - k);
    }
    return span;
}

int KnotVector::multiplicity(double u) const {
    int count = 0;
    for (double k : knots_)
        if (k == u) ++count;
    return count;
}

KnotVector make_uniform_knots(int degree, int num_elements, double a, double b) {
    if (num_elements < 1)
        throw validation_error("make_uniform_knots: need at least one element");
    std::vector<double> knots;
    knots.reserve(static_cast<std::size_t>(num_elements + 1 + 2 * degree));
    for (int i = 0; i < degree; ++i) knots.push_back(a);
    for (int i = 0; i <= num_elements; ++i)
        knots.push_back(a + (b - a) * static_cast<double>(i) / num_elements);
    for (int i = 0; i < degree; ++i) knots.push_back(b);
    return KnotVector(std::move(knots), degree);
}

}  // namespace thbx
