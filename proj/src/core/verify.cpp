#include "core/verify.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "core/adaptivity.hpp"
#include "core/errors.hpp"
#include "core/quadrature.hpp"
#include "core/runner.hpp"

namespace thbx {

namespace {

HierarchicalSpace random_thb(std::mt19937& rng, int max_levels, int rounds) {
    TensorSpace2D base(SplineSpace1D(make_uniform_knots(2, 4)),
                       SplineSpace1D(make_uniform_knots(2, 4)));
    HierarchicalSpace hs(base, max_levels);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    for (int r = 0; r < rounds; ++r) {
        std::vector<ElementId> marked;
        for (const ElementId& e : hs.active_elements())
            if (e.level + 2 <= hs.max_levels() && coin(rng) < 0.3) marked.push_back(e);
        if (marked.empty()) continue;
        hs = hs.refine_elements(marked);
    }
    return hs;
}

// values and parametric gradients of the supported hierarchical functions,
// from the M rows and a level-l tensor-basis evaluation (no Bernstein, no
// local Bezier extraction)
void direct_eval(const HierarchicalSpace& hs, ElementId e, double xi, double eta,
                 std::vector<double>& values, std::vector<double>& du, std::vector<double>& dv) {
    const std::vector<FunctionId> funcs = hs.functions_on_element(e);
    const MultilevelOperator& M = hs.global_multilevel_operator(e.level);
    const TensorSpace2D& sp = hs.level_space(e.level);

    Eigen::MatrixXd bu, bv;
    const int su = sp.u().kv().eval_basis_derivs(xi, 1, bu);
    const int sv = sp.v().kv().eval_basis_derivs(eta, 1, bv);
    const int p = sp.u().degree();
    const int q = sp.v().degree();

    values.assign(funcs.size(), 0.0);
    du.assign(funcs.size(), 0.0);
    dv.assign(funcs.size(), 0.0);
    for (std::size_t k = 0; k < funcs.size(); ++k) {
        const SparseRow& row =
            M.rows[static_cast<std::size_t>(hs.global_function_index(funcs[k]))];
        for (int j = 0; j <= q; ++j)
            for (int i = 0; i <= p; ++i) {
                const int col = sp.flatten(su - p + i, sv - q + j);
                const auto it = std::lower_bound(row.cols.begin(), row.cols.end(), col);
                if (it == row.cols.end() || *it != col) continue;
                const double c = row.vals[static_cast<std::size_t>(it - row.cols.begin())];
                values[k] += c * bu(0, i) * bv(0, j);
                du[k] += c * bu(1, i) * bv(0, j);
                dv[k] += c * bu(0, i) * bv(1, j);
            }
    }
}

CheckResult check_partition_of_unity() {
    CheckResult res{"thb_partition_of_unity", true, ""};
    std::mt19937 rng(20240601);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst = 0.0;
    for (int cfg = 0; cfg < 3; ++cfg) {
        const HierarchicalSpace hs = random_thb(rng, 4, 3);
        for (int k = 0; k < 200; ++k) {
            const HierEvalResult ev = hs.eval(unit(rng), unit(rng));
            worst = std::max(worst, std::abs(ev.values.sum() - 1.0));
        }
    }
    res.pass = worst < 1e-12;
    std::ostringstream os;
    os << "max |sum - 1| = " << worst;
    res.detail = os.str();
    return res;
}

CheckResult check_subdivision_identity() {
    CheckResult res{"subdivision_identity", true, ""};
    std::mt19937 rng(7771);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst = 0.0;
    // a uniform space and one with an interior double knot
    const std::vector<KnotVector> kvs = {
        make_uniform_knots(2, 4),
        KnotVector({0, 0, 0, 0.25, 0.5, 0.75, 0.75, 1, 1, 1}, 2),
        make_uniform_knots(3, 3),
    };
    for (const KnotVector& kv : kvs) {
        const SplineSpace1D coarse(kv);
        const ExtractionOperator S = subdivision_matrix(coarse);
        const KnotVector fine_kv = dyadic_refine(kv);
        for (int k = 0; k < 50; ++k) {
            const double xi = unit(rng);
            double Nc[KnotVector::max_degree + 1];
            double Nf[KnotVector::max_degree + 1];
            const int sc = kv.eval_basis(xi, Nc);
            const int sf = fine_kv.eval_basis(xi, Nf);
            for (int i = 0; i < kv.num_basis(); ++i) {
                double direct = 0.0;
                const int a = i - (sc - kv.degree());
                if (a >= 0 && a <= kv.degree()) direct = Nc[a];
                double combo = 0.0;
                for (int b = 0; b <= fine_kv.degree(); ++b)
                    combo += S.mat(i, sf - fine_kv.degree() + b) * Nf[b];
                worst = std::max(worst, std::abs(direct - combo));
            }
        }
    }
    res.pass = worst < 1e-12;
    std::ostringstream os;
    os << "max pointwise defect = " << worst;
    res.detail = os.str();
    return res;
}

CheckResult check_local_extraction_identity() {
    CheckResult res{"multilevel_extraction_identity", true, ""};
    std::mt19937 rng(91331);
    std::uniform_real_distribution<double> unit(0.05, 0.95);
    double worst = 0.0;
    for (int cfg = 0; cfg < 2; ++cfg) {
        const HierarchicalSpace hs = random_thb(rng, 4, 3);
        for (const ElementId& e : hs.active_elements()) {
            double u0, u1, v0, v1;
            hs.element_box(e, u0, u1, v0, v1);
            for (int k = 0; k < 5; ++k) {
                const double xi = u0 + unit(rng) * (u1 - u0);
                const double eta = v0 + unit(rng) * (v1 - v0);
                const HierEvalResult ev = hs.eval(xi, eta);
                std::vector<double> vals, du, dv;
                direct_eval(hs, e, xi, eta, vals, du, dv);
                for (std::size_t a = 0; a < vals.size(); ++a)
                    worst = std::max(worst,
                                     std::abs(vals[a] - ev.values[static_cast<int>(a)]));
            }
        }
    }
    res.pass = worst < 1e-12;
    std::ostringstream os;
    os << "max |C^e B - direct| = " << worst;
    res.detail = os.str();
    return res;
}

CheckResult check_assembly_equivalence(bool inject_fault) {
    CheckResult res{"bezier_assembly_equivalence", true, ""};

    MultipatchDomain domain;
    Patch patch;
    patch.geometry = make_rectangle_geometry(0.0, 1.0, 0.0, 1.0);
    patch.material = "air";
    domain.patches.push_back(std::move(patch));
    domain.materials["air"] = MaterialParams{};
    build_solution_spaces(domain, 2, 4, 4);

    // two rounds of corner refinement
    HierarchicalSpace& hs = domain.patches[0].space;
    hs = hs.refine_elements({{0, 0}});
    hs = hs.refine_elements({{1, 0}});

    const PhysicsProblem problem = poisson_peak_problem();
    const DofMap dofmap = build_dof_map(domain);
    const MaterialParams& mat = domain.material_of(0);
    const int n = dofmap.num_global;

    // Bezier path: C^e K_Bezier C^eT, optionally with one corrupted entry
    std::vector<Eigen::Triplet<double>> tb;
    bool corrupted = false;
    for (const ElementId& e : hs.active_elements()) {
        Eigen::MatrixXd K_bez;
        Eigen::VectorXd rhs_bez;
        element_stiffness_bezier(domain, 0, e, problem, K_bez, rhs_bez);
        ExtractionOperator C = hs.local_extraction(e);
        if (inject_fault && !corrupted) {
            C.mat(0, 0) += 1e-3;
            corrupted = true;
        }
        const Eigen::MatrixXd K_e = transform_element(K_bez, C);
        for (int a = 0; a < C.rows(); ++a)
            for (int b = 0; b < C.rows(); ++b)
                tb.emplace_back(
                    dofmap.to_global[0][static_cast<std::size_t>(C.row_index[static_cast<std::size_t>(a)])],
                    dofmap.to_global[0][static_cast<std::size_t>(C.row_index[static_cast<std::size_t>(b)])],
                    K_e(a, b));
    }
    Eigen::SparseMatrix<double> K_bezier_path(n, n);
    K_bezier_path.setFromTriplets(tb.begin(), tb.end());

    // direct path: quadrature against the chained-subdivision evaluation
    std::vector<Eigen::Triplet<double>> td;
    const GaussRule2D rule = gauss_rule(3);
    for (const ElementId& e : hs.active_elements()) {
        double u0, u1, v0, v1;
        hs.element_box(e, u0, u1, v0, v1);
        const double hu = u1 - u0;
        const double hv = v1 - v0;
        const std::vector<FunctionId> funcs = hs.functions_on_element(e);
        std::vector<int> gids;
        for (const FunctionId& f : funcs)
            gids.push_back(dofmap.to_global[0][static_cast<std::size_t>(
                hs.global_function_index(f))]);
        Eigen::MatrixXd K_loc =
            Eigen::MatrixXd::Zero(static_cast<int>(funcs.size()), static_cast<int>(funcs.size()));
        for (int k = 0; k < rule.size(); ++k) {
            const double xi = u0 + rule.u[static_cast<std::size_t>(k)] * hu;
            const double eta = v0 + rule.v[static_cast<std::size_t>(k)] * hv;
            std::vector<double> vals, du, dv;
            direct_eval(hs, e, xi, eta, vals, du, dv);
            Eigen::Matrix2d J;
            const Vec2 x = domain.patches[0].geometry.map(xi, eta, &J);
            const Eigen::Matrix2d invJT = J.inverse().transpose();
            const double w =
                rule.w[static_cast<std::size_t>(k)] * J.determinant() * hu * hv *
                problem.nu(x, mat);
            for (std::size_t a = 0; a < funcs.size(); ++a) {
                const Vec2 ga = invJT * Vec2(du[a], dv[a]);
                for (std::size_t b = 0; b < funcs.size(); ++b) {
                    const Vec2 gb = invJT * Vec2(du[b], dv[b]);
                    K_loc(static_cast<int>(a), static_cast<int>(b)) += w * ga.dot(gb);
                }
            }
        }
        for (std::size_t a = 0; a < funcs.size(); ++a)
            for (std::size_t b = 0; b < funcs.size(); ++b)
                td.emplace_back(gids[a], gids[b], K_loc(static_cast<int>(a), static_cast<int>(b)));
    }
    Eigen::SparseMatrix<double> K_direct(n, n);
    K_direct.setFromTriplets(td.begin(), td.end());

    const double rel = (K_bezier_path - K_direct).norm() / K_direct.norm();
    res.pass = rel < 1e-10;
    std::ostringstream os;
    os << "relative Frobenius error = " << rel;
    res.detail = os.str();
    return res;
}

CheckResult check_convergence_rate() {
    CheckResult res{"poisson_peak_convergence_rate", true, ""};
    RunConfig cfg;
    cfg.problem = "poisson_peak";
    cfg.degree = 2;
    cfg.initial_elements = 8;
    cfg.adaptivity.max_levels = 4;
    MultipatchDomain domain = build_domain(cfg);
    const PhysicsProblem problem = poisson_peak_problem();
    AdaptiveConfig acfg;
    const AdaptiveResult run = uniform_refinement_loop(domain, problem, 2, acfg);
    const double e1 = run.records[run.records.size() - 2].l2_error;
    const double e2 = run.records.back().l2_error;
    const double rate = std::log2(e1 / e2);
    res.pass = rate > 2.5 && rate < 3.5;
    std::ostringstream os;
    os << "observed L2 rate = " << rate << " (expect ~3 for p=2)";
    res.detail = os.str();
    return res;
}

}  // namespace

std::vector<CheckResult> verify_battery(bool inject_fault) {
    std::vector<CheckResult> out;
    out.push_back(check_partition_of_unity());
    out.push_back(check_subdivision_identity());
    out.push_back(check_local_extraction_identity());
    out.push_back(check_assembly_equivalence(inject_fault));
    out.push_back(check_convergence_rate());
    return out;
}

}  // namespace thbx
