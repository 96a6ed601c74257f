#include "core/adaptivity.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>

#include "core/errors.hpp"
#include "core/quadrature.hpp"

namespace thbx {

namespace {

// physical-space gradient of a discrete field at a parametric point
void field_grad(const MultipatchDomain& domain, const DofMap& dofmap,
                const Eigen::VectorXd& coeffs, int patch, double xi, double eta, double& val,
                Vec2& grad_phys, double& detJ) {
    const Patch& P = domain.patches[static_cast<std::size_t>(patch)];
    const HierEvalResult r = P.space.eval(xi, eta);
    val = 0.0;
    Vec2 gpar = Vec2::Zero();
    for (std::size_t k = 0; k < r.functions.size(); ++k) {
        const double c = coeffs[dofmap.global_of(domain, patch, r.functions[k])];
        val += c * r.values[static_cast<int>(k)];
        gpar.x() += c * r.grad_u[static_cast<int>(k)];
        gpar.y() += c * r.grad_v[static_cast<int>(k)];
    }
    Eigen::Matrix2d J;
    P.geometry.map(xi, eta, &J);
    detJ = J.determinant();
    // solve J^T grad_phys = grad_par with the 2x2 adjugate
    grad_phys.x() = (J(1, 1) * gpar.x() - J(1, 0) * gpar.y()) / detJ;
    grad_phys.y() = (-J(0, 1) * gpar.x() + J(0, 0) * gpar.y()) / detJ;
}

std::vector<PatchElement> sorted_active_elements(const MultipatchDomain& domain) {
    std::vector<PatchElement> out;
    for (int p = 0; p < static_cast<int>(domain.patches.size()); ++p)
        for (const ElementId& e : domain.patches[static_cast<std::size_t>(p)].space.active_elements())
            out.push_back({p, e});
    return out;  // already (patch, level, index) sorted
}

}  // namespace

MultipatchDomain with_extra_levels(const MultipatchDomain& domain, int extra) {
    MultipatchDomain out = domain;
    for (std::size_t p = 0; p < out.patches.size(); ++p) {
        const HierarchicalSpace& hs = domain.patches[p].space;
        std::vector<std::vector<int>> active(static_cast<std::size_t>(hs.max_levels()));
        for (int l = 0; l < hs.max_levels(); ++l) {
            const auto& states = hs.level_space(l);
            for (int e = 0; e < states.num_elements(); ++e)
                if (hs.element_state(l, e) == ElemState::Active)
                    active[static_cast<std::size_t>(l)].push_back(e);
        }
        out.patches[p].space = HierarchicalSpace::from_active_elements(
            hs.level_space(0), hs.max_levels() + extra, active, hs.truncated());
    }
    return out;
}

TwoMeshEstimate estimate_two_mesh(const MultipatchDomain& coarse_in,
                                  const PhysicsProblem& problem) {
    // fine space: one global dyadic refinement of the current mesh
    const MultipatchDomain coarse = with_extra_levels(coarse_in, 1);
    const MultipatchDomain fine = coarse.refine_all();

    const DofMap cmap = build_dof_map(coarse);
    const DofMap fmap = build_dof_map(fine);
    const int nf = fmap.num_global;
    const int nc = cmap.num_global;

    LinearSystem fine_sys = assemble(fine, problem, fmap);

    // B_h[i][j] = int nu grad(phi_fine_i) . grad(phi_coarse_j), by quadrature
    // over the fine elements
    std::vector<Eigen::Triplet<double>> triplets;
    for (int col = 0; col < fine_sys.K.outerSize(); ++col)
        for (Eigen::SparseMatrix<double>::InnerIterator it(fine_sys.K, col); it; ++it)
            triplets.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                                  it.value());

    for (int patch = 0; patch < static_cast<int>(fine.patches.size()); ++patch) {
        const Patch& FP = fine.patches[static_cast<std::size_t>(patch)];
        const Patch& CP = coarse.patches[static_cast<std::size_t>(patch)];
        const MaterialParams& mat = fine.material_of(patch);
        const int deg = std::max(FP.space.level_space(0).u().degree(),
                                 FP.space.level_space(0).v().degree());
        const GaussRule2D rule = gauss_rule(deg + 1);
        for (const ElementId& elem : FP.space.active_elements()) {
            double u0, u1, v0, v1;
            FP.space.element_box(elem, u0, u1, v0, v1);
            const double hu = u1 - u0;
            const double hv = v1 - v0;
            for (int k = 0; k < rule.size(); ++k) {
                const double xi = u0 + rule.u[static_cast<std::size_t>(k)] * hu;
                const double eta = v0 + rule.v[static_cast<std::size_t>(k)] * hv;
                Eigen::Matrix2d J;
                const Vec2 x = FP.geometry.map(xi, eta, &J);
                const double detJ = J.determinant();
                const Eigen::Matrix2d invJT = J.inverse().transpose();
                const double w = rule.w[static_cast<std::size_t>(k)] * detJ * hu * hv *
                                 problem.nu(x, mat);

                const HierEvalResult fe = FP.space.eval(xi, eta);
                const HierEvalResult ce = CP.space.eval(xi, eta);
                for (std::size_t a = 0; a < fe.functions.size(); ++a) {
                    const int gi = fmap.global_of(fine, patch, fe.functions[a]);
                    const Vec2 gfa =
                        invJT * Vec2(fe.grad_u[static_cast<int>(a)], fe.grad_v[static_cast<int>(a)]);
                    for (std::size_t b = 0; b < ce.functions.size(); ++b) {
                        const int gj = cmap.global_of(coarse, patch, ce.functions[b]);
                        const Vec2 gcb = invJT * Vec2(ce.grad_u[static_cast<int>(b)],
                                                      ce.grad_v[static_cast<int>(b)]);
                        const double val = w * gfa.dot(gcb);
                        if (val != 0.0) {
                            triplets.emplace_back(gi, nf + gj, val);
                            triplets.emplace_back(nf + gj, gi, val);
                        }
                    }
                }
            }
        }
    }

    LinearSystem saddle;
    saddle.spd = false;
    saddle.K.resize(nf + nc, nf + nc);
    saddle.K.setFromTriplets(triplets.begin(), triplets.end());
    saddle.K.makeCompressed();
    saddle.rhs = Eigen::VectorXd::Zero(nf + nc);
    saddle.rhs.head(nf) = fine_sys.rhs;

    // p gets homogeneous data; u carries the problem's Dirichlet values
    LinearSystem coarse_sys = assemble(coarse, problem, cmap);
    apply_dirichlet(coarse, problem, cmap, coarse_sys);
    for (int dof : dirichlet_dofs(fine, fmap)) saddle.dirichlet.emplace_back(dof, 0.0);
    for (const auto& [dof, val] : coarse_sys.dirichlet)
        saddle.dirichlet.emplace_back(nf + dof, val);
    std::sort(saddle.dirichlet.begin(), saddle.dirichlet.end());

    const Eigen::VectorXd x = solve(saddle);
    const Eigen::VectorXd p = x.head(nf);

    TwoMeshEstimate out;
    out.coarse_solution = x.tail(nc);
    out.fine_domain = fine;
    out.fine_dofmap = fmap;
    out.error_function = p;
    out.indicators.elements = sorted_active_elements(coarse_in);
    out.indicators.eta_sq.assign(out.indicators.elements.size(), 0.0);
    std::map<PatchElement, std::size_t> pos;
    for (std::size_t k = 0; k < out.indicators.elements.size(); ++k)
        pos[out.indicators.elements[k]] = k;

    // eta_k^2 accumulated from the fine elements inside each coarse element
    for (int patch = 0; patch < static_cast<int>(fine.patches.size()); ++patch) {
        const Patch& FP = fine.patches[static_cast<std::size_t>(patch)];
        const int deg = std::max(FP.space.level_space(0).u().degree(),
                                 FP.space.level_space(0).v().degree());
        const GaussRule2D rule = gauss_rule(deg + 1);
        for (const ElementId& elem : FP.space.active_elements()) {
            if (elem.level == 0) throw internal_error("estimator: fine element at level 0");
            const TensorSpace2D& fsp = FP.space.level_space(elem.level);
            const auto [ex, ey] = fsp.unflatten_elem(elem.index);
            const TensorSpace2D& csp = FP.space.level_space(elem.level - 1);
            const PatchElement parent{patch,
                                      {elem.level - 1, csp.flatten_elem(ex / 2, ey / 2)}};
            const auto it = pos.find(parent);
            if (it == pos.end())
                throw internal_error("estimator: fine element has no active parent");

            double u0, u1, v0, v1;
            FP.space.element_box(elem, u0, u1, v0, v1);
            const double hu = u1 - u0;
            const double hv = v1 - v0;
            double acc = 0.0;
            for (int k = 0; k < rule.size(); ++k) {
                const double xi = u0 + rule.u[static_cast<std::size_t>(k)] * hu;
                const double eta = v0 + rule.v[static_cast<std::size_t>(k)] * hv;
                double val, detJ;
                Vec2 grad;
                field_grad(fine, fmap, p, patch, xi, eta, val, grad, detJ);
                acc += rule.w[static_cast<std::size_t>(k)] * detJ * hu * hv * grad.squaredNorm();
            }
            out.indicators.eta_sq[it->second] += acc;
        }
    }
    out.indicators.total =
        std::accumulate(out.indicators.eta_sq.begin(), out.indicators.eta_sq.end(), 0.0);
    return out;
}

std::vector<PatchElement> mark_doerfler(const ErrorIndicators& ind, double theta) {
    if (!(theta > 0.0 && theta < 1.0))
        throw validation_error("mark_doerfler: theta must lie in (0, 1)");
    if (ind.total <= 0.0) return {};
    std::vector<std::size_t> order(ind.elements.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (ind.eta_sq[a] != ind.eta_sq[b]) return ind.eta_sq[a] > ind.eta_sq[b];
        return ind.elements[a] < ind.elements[b];
    });
    std::vector<PatchElement> marked;
    double sum = 0.0;
    for (std::size_t k : order) {
        if (sum >= theta * ind.total) break;
        marked.push_back(ind.elements[k]);
        sum += ind.eta_sq[k];
    }
    std::sort(marked.begin(), marked.end());
    return marked;
}

std::vector<PatchElement> mark_true_error(const ErrorIndicators& element_errors_sq, double tol) {
    std::vector<PatchElement> marked;
    for (std::size_t k = 0; k < element_errors_sq.elements.size(); ++k)
        if (std::sqrt(element_errors_sq.eta_sq[k]) > tol)
            marked.push_back(element_errors_sq.elements[k]);
    return marked;
}

ReferenceSolution solve_reference(const MultipatchDomain& initial, const PhysicsProblem& problem,
                                  int levels) {
    ReferenceSolution ref;
    ref.domain = initial;
    for (Patch& patch : ref.domain.patches) {
        const HierarchicalSpace& hs = patch.space;
        if (hs.deepest_active_level() != 0)
            throw validation_error("solve_reference: initial mesh must be unrefined");
        patch.space = HierarchicalSpace(hs.level_space(0), levels + 1, hs.truncated());
    }
    for (int l = 0; l < levels; ++l) ref.domain = ref.domain.refine_all();
    ref.dofmap = build_dof_map(ref.domain);
    LinearSystem sys = assemble(ref.domain, problem, ref.dofmap);
    apply_dirichlet(ref.domain, problem, ref.dofmap, sys);
    ref.coeffs = solve(sys);
    return ref;
}

ErrorIndicators reference_element_errors(const MultipatchDomain& domain, const DofMap& dofmap,
                                         const Eigen::VectorXd& solution,
                                         const ReferenceSolution& ref) {
    ErrorIndicators ind;
    ind.elements = sorted_active_elements(domain);
    ind.eta_sq.assign(ind.elements.size(), 0.0);
    std::map<PatchElement, std::size_t> pos;
    for (std::size_t k = 0; k < ind.elements.size(); ++k) pos[ind.elements[k]] = k;

    SolutionField u_h{&domain, &dofmap, solution};
    SolutionField u_ref{&ref.domain, &ref.dofmap, ref.coeffs};

    for (int patch = 0; patch < static_cast<int>(domain.patches.size()); ++patch) {
        const Patch& RP = ref.domain.patches[static_cast<std::size_t>(patch)];
        const Patch& CP = domain.patches[static_cast<std::size_t>(patch)];
        const int deg = std::max(RP.space.level_space(0).u().degree(),
                                 RP.space.level_space(0).v().degree());
        const GaussRule2D rule = gauss_rule(deg + 2);
        for (const ElementId& elem : RP.space.active_elements()) {
            // current-mesh ancestor of this reference element
            const TensorSpace2D& rsp = RP.space.level_space(elem.level);
            auto [ex, ey] = rsp.unflatten_elem(elem.index);
            int lvl = elem.level;
            int cur = -1;
            int cx = ex, cy = ey;
            for (int l = lvl; l >= 0; --l) {
                const TensorSpace2D& csp = CP.space.level_space(l);
                const int flat = csp.flatten_elem(cx, cy);
                if (CP.space.element_state(l, flat) == ElemState::Active) {
                    cur = flat;
                    lvl = l;
                    break;
                }
                if (CP.space.element_state(l, flat) == ElemState::Refined)
                    throw validation_error(
                        "reference_element_errors: reference space does not refine the "
                        "current space");
                cx /= 2;
                cy /= 2;
            }
            if (cur < 0)
                throw internal_error("reference_element_errors: uncovered reference element");
            const auto it = pos.find({patch, {lvl, cur}});
            if (it == pos.end())
                throw internal_error("reference_element_errors: missing parent element");

            double u0, u1, v0, v1;
            RP.space.element_box(elem, u0, u1, v0, v1);
            const double hu = u1 - u0;
            const double hv = v1 - v0;
            double acc = 0.0;
            for (int k = 0; k < rule.size(); ++k) {
                const double xi = u0 + rule.u[static_cast<std::size_t>(k)] * hu;
                const double eta = v0 + rule.v[static_cast<std::size_t>(k)] * hv;
                Eigen::Matrix2d J;
                RP.geometry.map(xi, eta, &J);
                const double diff =
                    u_ref.value(patch, xi, eta) - u_h.value(patch, xi, eta);
                acc += rule.w[static_cast<std::size_t>(k)] * J.determinant() * hu * hv * diff *
                       diff;
            }
            ind.eta_sq[it->second] += acc;
        }
    }
    ind.total = std::accumulate(ind.eta_sq.begin(), ind.eta_sq.end(), 0.0);
    return ind;
}

double l2_error_exact(const MultipatchDomain& domain, const DofMap& dofmap,
                      const Eigen::VectorXd& solution,
                      const std::function<double(const Vec2&)>& exact) {
    SolutionField u_h{&domain, &dofmap, solution};
    double acc = 0.0;
    for (int patch = 0; patch < static_cast<int>(domain.patches.size()); ++patch) {
        const Patch& P = domain.patches[static_cast<std::size_t>(patch)];
        const int deg = std::max(P.space.level_space(0).u().degree(),
                                 P.space.level_space(0).v().degree());
        const GaussRule2D rule = gauss_rule(deg + 2);
        for (const ElementId& elem : P.space.active_elements()) {
            double u0, u1, v0, v1;
            P.space.element_box(elem, u0, u1, v0, v1);
            const double hu = u1 - u0;
            const double hv = v1 - v0;
            for (int k = 0; k < rule.size(); ++k) {
                const double xi = u0 + rule.u[static_cast<std::size_t>(k)] * hu;
                const double eta = v0 + rule.v[static_cast<std::size_t>(k)] * hv;
                Eigen::Matrix2d J;
                const Vec2 x = P.geometry.map(xi, eta, &J);
                const double diff = u_h.value(patch, xi, eta) - exact(x);
                acc += rule.w[static_cast<std::size_t>(k)] * J.determinant() * hu * hv * diff *
                       diff;
            }
        }
    }
    return std::sqrt(acc);
}

namespace {

AdaptiveResult run_loop(const MultipatchDomain& initial, const PhysicsProblem& problem,
                        const AdaptiveConfig& config, bool uniform, int uniform_steps,
                        const IterationObserver& observer) {
    AdaptiveResult result;
    result.domain = initial;

    std::optional<ReferenceSolution> ref;
    if (!uniform && config.marking == MarkingMode::TrueError)
        ref = solve_reference(initial, problem, config.reference_levels);

    const int max_iter = uniform ? uniform_steps : config.max_iterations;
    int prev_elements = -1;
    for (int iter = 0;; ++iter) {
        const auto t0 = std::chrono::steady_clock::now();
        result.dofmap = build_dof_map(result.domain);
        LinearSystem sys = assemble(result.domain, problem, result.dofmap);
        apply_dirichlet(result.domain, problem, result.dofmap, sys);
        result.solution = solve(sys);

        ConvergenceRecord rec;
        rec.iter = iter;
        rec.dofs = result.dofmap.num_global;
        rec.elements = result.domain.num_active_elements();
        rec.elements_per_level = result.domain.active_elements_per_level();

        std::optional<ErrorIndicators> ref_errors;
        if (ref) {
            ref_errors =
                reference_element_errors(result.domain, result.dofmap, result.solution, *ref);
            rec.l2_error = std::sqrt(ref_errors->total);
        } else if (problem.has_exact) {
            rec.l2_error = l2_error_exact(result.domain, result.dofmap, result.solution,
                                          problem.exact);
        }

        std::optional<TwoMeshEstimate> estimate;
        if (!uniform && config.marking == MarkingMode::Estimator) {
            estimate = estimate_two_mesh(result.domain, problem);
            estimate->indicators.iteration = iter;
            rec.estimator_total = estimate->indicators.total;
        }
        if (config.record_timing)
            rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                              .count();
        result.records.push_back(rec);
        if (observer) observer(iter, result.domain, result.dofmap, result.solution);

        if (iter == max_iter) break;

        std::vector<PatchElement> marked;
        if (uniform) {
            marked = sorted_active_elements(result.domain);
        } else {
            switch (config.marking) {
                case MarkingMode::Estimator:
                    marked = mark_doerfler(estimate->indicators, config.theta);
                    break;
                case MarkingMode::TrueError:
                    marked = mark_true_error(*ref_errors, config.tolerance);
                    break;
                case MarkingMode::MarkAll:
                    marked = sorted_active_elements(result.domain);
                    break;
            }
            // respect the hierarchy depth cap
            std::erase_if(marked, [&](const PatchElement& m) {
                return m.elem.level + 2 >
                       result.domain.patches[static_cast<std::size_t>(m.patch)].space.max_levels();
            });
        }
        if (marked.empty()) break;

        prev_elements = result.domain.num_active_elements();
        result.domain = result.domain.refine(marked);
        if (result.domain.num_active_elements() <= prev_elements)
            throw internal_error("adaptive_loop: refinement produced no new elements");
    }
    return result;
}

}  // namespace

AdaptiveResult adaptive_loop(const MultipatchDomain& initial, const PhysicsProblem& problem,
                             const AdaptiveConfig& config, const IterationObserver& observer) {
    if (!(config.theta > 0.0 && config.theta < 1.0))
        throw validation_error("adaptive_loop: theta must lie in (0, 1)");
    if (config.max_iterations < 0)
        throw validation_error("adaptive_loop: max_iterations must be non-negative");
    return run_loop(initial, problem, config, false, 0, observer);
}

AdaptiveResult uniform_refinement_loop(const MultipatchDomain& initial,
                                       const PhysicsProblem& problem, int steps,
                                       const AdaptiveConfig& config,
                                       const IterationObserver& observer) {
    return run_loop(initial, problem, config, true, steps, observer);
}

}  // namespace thbx
