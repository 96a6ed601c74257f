#pragma once

#include <functional>
#include <string>
#include <vector>

#include "core/dof_map.hpp"
#include "core/geometry.hpp"

namespace thbx {

inline constexpr double vacuum_permeability = 4.0e-7 * M_PI;  // H/m

/// Scalar diffusion problem -div(nu grad u) = rhs with Dirichlet data g.
/// Covers the Poisson benchmark (nu = 1, rhs = f) and the 2D scalar
/// magnetostatic formulation (u = A_z, nu = 1/(mu0 mu_r), rhs = J_z plus
/// the magnetization term contributed through remanence).
struct PhysicsProblem {
    std::string name;
    std::function<double(const Vec2&, const MaterialParams&)> nu;
    std::function<double(const Vec2&, const MaterialParams&)> source;
    std::function<Vec2(const Vec2&, const MaterialParams&)> remanence;
    std::function<double(const Vec2&)> dirichlet;
    bool has_exact = false;
    std::function<double(const Vec2&)> exact;
    std::function<Vec2(const Vec2&)> exact_grad;
};

/// Magnetization part of the weak-form right-hand side at one point:
/// nu (B_rx dv/dy - B_ry dv/dx), so that B_r drives the field of Ampere's
/// law reduced to 2D. Zero wherever B_r vanishes.
double magnetization_integrand(const PhysicsProblem& problem, const Vec2& x,
                               const MaterialParams& mat, const Vec2& grad_test);

/// Unit-square Poisson benchmark with the exponential peak
/// u = exp(-alpha ((x-1/2)^2 + (y-1/2)^2)), alpha = 100; f = -lap u and
/// the Dirichlet data are the traces of u.
PhysicsProblem poisson_peak_problem();

/// Scalar 2D magnetostatic problem (vector potential A_z); coefficients
/// come from the patch material table.
PhysicsProblem magnetostatic_problem();

/// Default material table for the magnetostatic examples:
/// air (mu_r 1), iron (mu_r 2000), magnet (mu_r 1.05, B_r = (0, 1.2) T).
std::map<std::string, MaterialParams> magnetostatic_default_materials();

/// Loads the bundled horseshoe geometry (30 conforming patches, 3 material
/// tags) and attaches the default material table.
MultipatchDomain horseshoe_domain(const std::string& geometry_path);

/// Discrete solution over a multipatch domain: per-DOF coefficients tied to
/// a DofMap. Evaluation maps parametric gradients through the patch
/// geometry, giving physical-space derivatives.
struct SolutionField {
    const MultipatchDomain* domain = nullptr;
    const DofMap* dofmap = nullptr;
    Eigen::VectorXd coeffs;

    double value(int patch, double xi, double eta) const;
    /// value, physical gradient and physical position at a parametric point
    void sample(int patch, double xi, double eta, double& val, Vec2& grad, Vec2& pos) const;
};

/// Point sample of the magnetostatic post-processing: vector potential and
/// flux density B = (dAz/dy, -dAz/dx).
struct FieldSample {
    Vec2 position = Vec2::Zero();
    double az = 0.0;
    Vec2 b = Vec2::Zero();
    int level = 0;  ///< hierarchical level of the element sampled
};

/// Samples A_z and B on a uniform (resolution x resolution) parametric grid
/// of one patch.
std::vector<FieldSample> postprocess_B(const SolutionField& field, int patch, int resolution);

}  // namespace thbx
