#include "core/quadrature.hpp"

#include <array>
#include <cmath>
#include <mutex>

#include "core/errors.hpp"

namespace thbx {

namespace {

constexpr int max_points = 16;

GaussRule1D compute_rule(int n) {
    // roots of P_n on [-1, 1] by Newton from Chebyshev initial guesses,
    // then mapped to [0, 1]
    GaussRule1D rule;
    rule.points.resize(static_cast<std::size_t>(n));
    rule.weights.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0;
            double p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            pp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) {
                // one final polish step
                p0 = 1.0;
                p1 = x;
                for (int k = 2; k <= n; ++k) {
                    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                pp = n * (x * p1 - p0) / (x * x - 1.0);
                x -= p1 / pp;
                break;
            }
        }
        rule.points[static_cast<std::size_t>(n - 1 - i)] = 0.5 * (1.0 + x);
        rule.weights[static_cast<std::size_t>(n - 1 - i)] =
            1.0 / ((1.0 - x * x) * pp * pp);
    }
    if (n == 1) {
        rule.points[0] = 0.5;
        rule.weights[0] = 1.0;
    }
    return rule;
}

}  // namespace

const GaussRule1D& gauss_rule_1d(int n) {
    if (n < 1 || n > max_points)
        throw validation_error("gauss_rule: points per direction must be in [1, 16], got " +
                               std::to_string(n));
    static std::array<GaussRule1D, max_points> cache;
    static std::once_flag flags[max_points];
    std::call_once(flags[n - 1], [n] { cache[static_cast<std::size_t>(n - 1)] = compute_rule(n); });
    return cache[static_cast<std::size_t>(n - 1)];
}

GaussRule2D gauss_rule(int n) {
    const GaussRule1D& r = gauss_rule_1d(n);
    GaussRule2D out;
    out.u.reserve(static_cast<std::size_t>(n * n));
    out.v.reserve(static_cast<std::size_t>(n * n));
    out.w.reserve(static_cast<std::size_t>(n * n));
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            out.u.push_back(r.points[static_cast<std::size_t>(i)]);
            out.v.push_back(r.points[static_cast<std::size_t>(j)]);
            out.w.push_back(r.weights[static_cast<std::size_t>(i)] *
                            r.weights[static_cast<std::size_t>(j)]);
        }
    return out;
}

}  // namespace thbx
