#pragma once

#include <string>
#include <vector>

namespace thbx {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

/// Built-in verification battery: partition of unity, the subdivision and
/// multi-level extraction identities, Bezier-path vs direct-quadrature
/// assembly equivalence, and a Poisson convergence-rate check.
/// `inject_fault` corrupts one C^e entry inside the assembly-equivalence
/// check; the check must then fail (negative control).
std::vector<CheckResult> verify_battery(bool inject_fault);

}  // namespace thbx
