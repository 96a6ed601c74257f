#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "core/assembly.hpp"

namespace thbx {

/// Per-element squared error indicators over the active elements of a
/// multipatch mesh, in sorted (patch, level, index) order.
struct ErrorIndicators {
    std::vector<PatchElement> elements;
    std::vector<double> eta_sq;
    double total = 0.0;
    int iteration = 0;
};

enum class MarkingMode { Estimator, TrueError, MarkAll };

struct AdaptiveConfig {
    double theta = 0.5;          ///< Doerfler parameter, in (0, 1)
    int max_iterations = 5;      ///< refinement steps; 0 = initial solve only
    int max_levels = 5;          ///< hierarchy depth cap
    MarkingMode marking = MarkingMode::Estimator;
    double tolerance = 1e-8;     ///< per-element L2 threshold (true-error mode)
    int reference_levels = 3;    ///< uniform refinements for the reference solve
    bool record_timing = false;  ///< keep wall times out of records by default
};

struct ConvergenceRecord {
    int iter = 0;
    int dofs = 0;
    int elements = 0;
    std::vector<int> elements_per_level;
    double l2_error = 0.0;
    double estimator_total = 0.0;
    double seconds = 0.0;
};

struct AdaptiveResult {
    std::vector<ConvergenceRecord> records;
    MultipatchDomain domain;
    DofMap dofmap;
    Eigen::VectorXd solution;
};

/// Two-mesh least-squares error estimate: assembles and solves the saddle
/// system [[A_h, B_h], [B_h^T, 0]] [p; u] = [f; 0] with A_h the stiffness of
/// the uniformly refined mesh and B_h the coarse stiffness mapped onto it,
/// then integrates eta_k^2 = int_k |grad p|^2 per coarse element.
struct TwoMeshEstimate {
    ErrorIndicators indicators;
    Eigen::VectorXd coarse_solution;  ///< the u block, on the coarse DOF map
    MultipatchDomain fine_domain;     ///< one uniform refinement of the input
    DofMap fine_dofmap;
    Eigen::VectorXd error_function;   ///< the p block, on the fine DOF map
};

TwoMeshEstimate estimate_two_mesh(const MultipatchDomain& domain, const PhysicsProblem& problem);

/// Doerfler marking: minimal sorted-greedy set M with
/// sum_{k in M} eta_k^2 >= theta * total. Ties break by element id.
std::vector<PatchElement> mark_doerfler(const ErrorIndicators& ind, double theta);

/// Marks every element whose L2 error exceeds the tolerance.
std::vector<PatchElement> mark_true_error(const ErrorIndicators& element_errors_sq, double tol);

/// Reference discretization: the initial mesh refined uniformly `levels`
/// times, solved once; drives true-error marking.
struct ReferenceSolution {
    MultipatchDomain domain;
    DofMap dofmap;
    Eigen::VectorXd coeffs;
};

ReferenceSolution solve_reference(const MultipatchDomain& initial, const PhysicsProblem& problem,
                                  int levels);

/// Per-element (of the current mesh) squared L2 errors against the
/// reference solution, integrated over the reference space's elements.
/// Requires the reference mesh to refine the current one.
ErrorIndicators reference_element_errors(const MultipatchDomain& domain, const DofMap& dofmap,
                                         const Eigen::VectorXd& solution,
                                         const ReferenceSolution& ref);

/// L2 norm of (u_h - u_exact) over the whole domain.
double l2_error_exact(const MultipatchDomain& domain, const DofMap& dofmap,
                      const Eigen::VectorXd& solution,
                      const std::function<double(const Vec2&)>& exact);

/// Rebuilds every patch hierarchy with additional level headroom.
MultipatchDomain with_extra_levels(const MultipatchDomain& domain, int extra);

/// Invoked after each solve with the state behind the just-appended record.
using IterationObserver =
    std::function<void(int iter, const MultipatchDomain&, const DofMap&, const Eigen::VectorXd&)>;

/// solve -> estimate/mark -> refine loop (marking mode per config).
AdaptiveResult adaptive_loop(const MultipatchDomain& initial, const PhysicsProblem& problem,
                             const AdaptiveConfig& config,
                             const IterationObserver& observer = nullptr);

/// Plain uniform-refinement driver used for the comparison curves; performs
/// `steps` global refinements with a solve + record at each state.
AdaptiveResult uniform_refinement_loop(const MultipatchDomain& initial,
                                       const PhysicsProblem& problem, int steps,
                                       const AdaptiveConfig& config,
                                       const IterationObserver& observer = nullptr);

}  // namespace thbx
