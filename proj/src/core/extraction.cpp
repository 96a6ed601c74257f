#include "core/extraction.hpp"

#include <algorithm>

#include "core/errors.hpp"

namespace thbx {

namespace {

// Boehm insertion weights for one new knot; alpha[j] weights Q_j = alpha_j
// P_j + (1 - alpha_j) P_{j-1} in the refined control polygon of size n+1.
std::vector<double> insertion_alphas(const KnotVector& kv, double u, int span) {
    const int p = kv.degree();
    const int n = kv.num_basis();
    std::vector<double> alpha(static_cast<std::size_t>(n) + 1);
    for (int j = 0; j <= n; ++j) {
        if (j <= span - p)
            alpha[static_cast<std::size_t>(j)] = 1.0;
        else if (j >= span + 1)
            alpha[static_cast<std::size_t>(j)] = 0.0;
        else
            alpha[static_cast<std::size_t>(j)] =
                (u - kv.knot(j)) / (kv.knot(j + p) - kv.knot(j));
    }
    return alpha;
}

// banded row of the accumulated transfer: values for columns
// begin..begin+vals.size()-1
struct BandRow {
    int begin = 0;
    std::vector<double> vals;

    double at(int col) const {
        const int k = col - begin;
        return (k >= 0 && k < static_cast<int>(vals.size())) ? vals[static_cast<std::size_t>(k)]
                                                             : 0.0;
    }
};

}  // namespace

KnotVector insert_knots(const KnotVector& kv, const std::vector<double>& new_knots,
                        ExtractionOperator* transfer) {
    for (double u : new_knots) {
        if (u <= kv.domain_min() || u >= kv.domain_max())
            throw validation_error("insert_knots: new knot " + std::to_string(u) +
                                   " must lie strictly inside the domain");
    }
    std::vector<double> sorted = new_knots;
    std::sort(sorted.begin(), sorted.end());
    // multiplicity check up front so no partial work leaks out
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        int mult = kv.multiplicity(sorted[i]) + 1;
        for (std::size_t j = 0; j < i; ++j)
            if (sorted[j] == sorted[i]) ++mult;
        if (mult > std::max(kv.degree(), 1))
            throw validation_error("insert_knots: multiplicity of knot " +
                                   std::to_string(sorted[i]) + " would exceed the degree");
    }

    KnotVector current = kv;
    const int n0 = kv.num_basis();
    std::vector<BandRow> rows;
    if (transfer) {
        rows.resize(static_cast<std::size_t>(n0));
        for (int i = 0; i < n0; ++i) rows[static_cast<std::size_t>(i)] = {i, {1.0}};
    }
    for (double u : sorted) {
        const int span = current.find_span(u);
        std::vector<double> refined = current.knots();
        refined.insert(refined.begin() + span + 1, u);
        if (transfer) {
            // banded update: new column j mixes old columns j and j-1
            const std::vector<double> alpha = insertion_alphas(current, u, span);
            const int m = current.num_basis();
            for (BandRow& row : rows) {
                const int lo = std::max(0, row.begin);
                const int hi = std::min(m, row.begin + static_cast<int>(row.vals.size()) + 1);
                BandRow next;
                next.begin = lo;
                next.vals.assign(static_cast<std::size_t>(hi - lo + 1), 0.0);
                for (int j = lo; j <= hi; ++j) {
                    const double a = (j <= m) ? ((j < static_cast<int>(alpha.size()))
                                                    ? alpha[static_cast<std::size_t>(j)]
                                                    : 0.0)
                                              : 0.0;
                    const double v = a * row.at(j) + (1.0 - a) * row.at(j - 1);
                    if (j - lo < static_cast<int>(next.vals.size()))
                        next.vals[static_cast<std::size_t>(j - lo)] = v;
                }
                while (!next.vals.empty() && next.vals.back() == 0.0) next.vals.pop_back();
                while (!next.vals.empty() && next.vals.front() == 0.0) {
                    next.vals.erase(next.vals.begin());
                    ++next.begin;
                }
                row = std::move(next);
            }
        }
        current = KnotVector(std::move(refined), kv.degree());
    }
    if (transfer) {
        transfer->mat.setZero(n0, current.num_basis());
        for (int i = 0; i < n0; ++i) {
            const BandRow& row = rows[static_cast<std::size_t>(i)];
            for (int k = 0; k < static_cast<int>(row.vals.size()); ++k)
                transfer->mat(i, row.begin + k) = row.vals[static_cast<std::size_t>(k)];
        }
        transfer->row_index.clear();
        transfer->col_index.clear();
    }
    return current;
}

KnotVector dyadic_refine(const KnotVector& kv) {
    SplineSpace1D space(kv);
    std::vector<double> mids;
    mids.reserve(static_cast<std::size_t>(space.num_elements()));
    for (int e = 0; e < space.num_elements(); ++e) {
        const auto [a, b] = space.element_interval(e);
        mids.push_back(0.5 * (a + b));
    }
    return insert_knots(kv, mids);
}

ExtractionOperator subdivision_matrix(const SplineSpace1D& coarse) {
    std::vector<double> mids;
    mids.reserve(static_cast<std::size_t>(coarse.num_elements()));
    for (int e = 0; e < coarse.num_elements(); ++e) {
        const auto [a, b] = coarse.element_interval(e);
        mids.push_back(0.5 * (a + b));
    }
    ExtractionOperator op;
    insert_knots(coarse.kv(), mids, &op);
    return op;
}

std::vector<Eigen::MatrixXd> bezier_extraction(const SplineSpace1D& space) {
    const int p = space.degree();
    const KnotVector& kv = space.kv();

    std::vector<double> to_insert;
    const auto& bp = space.breakpoints();
    for (std::size_t i = 1; i + 1 < bp.size(); ++i) {
        const int missing = p - kv.multiplicity(bp[i]);
        for (int c = 0; c < missing; ++c) to_insert.push_back(bp[i]);
    }

    ExtractionOperator full;
    insert_knots(kv, to_insert, &full);

    const int nel = space.num_elements();
    std::vector<Eigen::MatrixXd> ops;
    ops.reserve(static_cast<std::size_t>(nel));
    for (int e = 0; e < nel; ++e) {
        Eigen::MatrixXd E(p + 1, p + 1);
        const int first = space.first_basis_on_element(e);
        // Bernstein segment b of element e is decomposed-basis function e*p+b
        // (for p = 0 each element owns exactly one function).
        for (int a = 0; a <= p; ++a)
            for (int b = 0; b <= p; ++b)
                E(a, b) = full.mat(first + a, p == 0 ? e : e * p + b);
        ops.push_back(std::move(E));
    }
    return ops;
}

}  // namespace thbx
