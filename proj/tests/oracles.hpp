#pragma once

// Test-only oracles, kept independent of the implementation paths they
// check: the brute-force active-set classifier works straight from element
// states, and the chain evaluator expands hierarchical functions through
// its own knot-insertion transfers instead of the cached multi-level
// operator machinery.

#include <vector>

#include "core/extraction.hpp"
#include "core/hierarchy.hpp"

namespace thbx::oracle {

/// Brute-force classification of one level's functions from element states:
/// a function is active iff every element of its support is covered at this
/// level or deeper and at least one is active at this level.
struct FunctionSets {
    std::vector<int> active;
    std::vector<int> deactivated;
};
FunctionSets classify_level(const HierarchicalSpace& hs, int level);

/// Value of one active hierarchical function at a point, evaluated by
/// expanding through per-step midpoint knot-insertion transfers with
/// truncation masks taken from the oracle's own classification.
double eval_function_direct(const HierarchicalSpace& hs, FunctionId f, double xi, double eta);

/// Same expansion, returning the value and the parametric gradient.
void eval_function_direct_grad(const HierarchicalSpace& hs, FunctionId f, double xi, double eta,
                               double& value, double& du, double& dv);

/// Central finite difference of a scalar function of one variable.
template <typename F>
double central_diff(F&& f, double x, double h = 1e-6) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

}  // namespace thbx::oracle
