#pragma once

#include <iosfwd>
#include <vector>

#include <Eigen/Sparse>

#include "core/dof_map.hpp"
#include "core/physics.hpp"

namespace thbx {

/// Sparse symmetric system with Dirichlet constraints kept separate; solve()
/// eliminates them symmetrically. `spd` selects the factorization (LDLT for
/// the Galerkin systems, LU for the indefinite saddle systems).
struct LinearSystem {
    Eigen::SparseMatrix<double> K;
    Eigen::VectorXd rhs;
    std::vector<std::pair<int, double>> dirichlet;  ///< sorted by DOF id
    bool spd = true;
};

/// Bezier-element stiffness and load: Bernstein-basis integrals on one
/// active element pushed through the element box and the patch geometry.
/// K[a][b] = int_e nu grad B_a . grad B_b dx (symmetric); the load carries
/// the source term and, for magnetostatics, the magnetization term.
void element_stiffness_bezier(const MultipatchDomain& domain, int patch, ElementId elem,
                              const PhysicsProblem& problem, Eigen::MatrixXd& K_bez,
                              Eigen::VectorXd& rhs_bez);

/// K_Bspline = C K_Bezier C^T.
Eigen::MatrixXd transform_element(const Eigen::MatrixXd& K_bez, const ExtractionOperator& C);

/// Element loop over all active elements of all patches; Bezier stiffness,
/// C^e transformation and scatter through the merged DOF numbering.
LinearSystem assemble(const MultipatchDomain& domain, const PhysicsProblem& problem,
                      const DofMap& dofmap);

/// Fills the Dirichlet constraint set: boundary corner DOFs interpolate the
/// data g, the remaining boundary DOFs come from per-side L2 projection of g
/// onto the boundary trace space.
void apply_dirichlet(const MultipatchDomain& domain, const PhysicsProblem& problem,
                     const DofMap& dofmap, LinearSystem& sys);

/// Direct sparse solve of the constrained system; returns the full-length
/// coefficient vector with prescribed values filled in. Relative residual
/// beyond 1e-12 or a failed factorization raises solver_error.
Eigen::VectorXd solve(const LinearSystem& sys);

/// Coordinate-format debug export: `row col value` lines (17 significant
/// digits, sorted), then `rhs i value` lines.
void dump_linear_system(const LinearSystem& sys, std::ostream& os);

}  // namespace thbx
