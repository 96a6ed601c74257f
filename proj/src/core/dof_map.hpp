#pragma once

#include <vector>

#include "core/geometry.hpp"

namespace thbx {

/// Global DOF numbering over all patches' active functions, with coincident
/// interface functions merged into shared DOFs. Deterministic: DOFs are
/// numbered by the first (patch, level, index) member of each merge class.
struct DofMap {
    int num_global = 0;
    std::vector<std::vector<int>> to_global;  // per patch, per active-function ordinal

    int global_of(const MultipatchDomain& domain, int patch, FunctionId f) const {
        const int ord = domain.patches[static_cast<std::size_t>(patch)]
                            .space.global_function_index(f);
        return to_global[static_cast<std::size_t>(patch)][static_cast<std::size_t>(ord)];
    }
};

DofMap build_dof_map(const MultipatchDomain& domain);

/// Function on a patch side with non-vanishing trace along that side.
struct SideFunction {
    int level = 0;
    int t = 0;  ///< function index along the interface direction
    FunctionId f;
};

/// Active functions of the side's boundary band whose trace along the side
/// is not identically zero, sorted by (level, t).
std::vector<SideFunction> trace_active_functions(const HierarchicalSpace& hs, Side side);

/// Sorted global DOF ids with non-vanishing trace on the outer boundary.
std::vector<int> dirichlet_dofs(const MultipatchDomain& domain, const DofMap& dofmap);

}  // namespace thbx
