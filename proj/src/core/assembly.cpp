#include "core/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include "core/bernstein.hpp"
#include "core/errors.hpp"
#include "core/quadrature.hpp"

namespace thbx {

namespace {

// Bernstein values and parametric-square derivatives at a tensor rule's
// points, shared by every element of the same degree.
struct BernsteinTable {
    GaussRule2D rule;
    std::vector<Eigen::VectorXd> B;
    std::vector<Eigen::VectorXd> dBu;
    std::vector<Eigen::VectorXd> dBv;
};

BernsteinTable make_table(int p, int q, int points_u, int points_v) {
    BernsteinTable tab;
    const GaussRule1D& ru = gauss_rule_1d(points_u);
    const GaussRule1D& rv = gauss_rule_1d(points_v);
    for (int j = 0; j < points_v; ++j)
        for (int i = 0; i < points_u; ++i) {
            tab.rule.u.push_back(ru.points[static_cast<std::size_t>(i)]);
            tab.rule.v.push_back(rv.points[static_cast<std::size_t>(j)]);
            tab.rule.w.push_back(ru.weights[static_cast<std::size_t>(i)] *
                                 rv.weights[static_cast<std::size_t>(j)]);
        }
    const int nloc = (p + 1) * (q + 1);
    for (int k = 0; k < tab.rule.size(); ++k) {
        const Eigen::MatrixXd bu = bernstein_derivs(p, tab.rule.u[static_cast<std::size_t>(k)], 1);
        const Eigen::MatrixXd bv = bernstein_derivs(q, tab.rule.v[static_cast<std::size_t>(k)], 1);
        Eigen::VectorXd B(nloc), Du(nloc), Dv(nloc);
        for (int j = 0; j <= q; ++j)
            for (int i = 0; i <= p; ++i) {
                const int idx = j * (p + 1) + i;
                B[idx] = bu(0, i) * bv(0, j);
                Du[idx] = bu(1, i) * bv(0, j);
                Dv[idx] = bu(0, i) * bv(1, j);
            }
        tab.B.push_back(std::move(B));
        tab.dBu.push_back(std::move(Du));
        tab.dBv.push_back(std::move(Dv));
    }
    return tab;
}

void element_integrals(const MultipatchDomain& domain, int patch, ElementId elem,
                       const PhysicsProblem& problem, const BernsteinTable& tab,
                       Eigen::MatrixXd* K_bez, Eigen::VectorXd* rhs_bez) {
    const Patch& P = domain.patches[static_cast<std::size_t>(patch)];
    const MaterialParams& mat = domain.material_of(patch);
    const HierarchicalSpace& hs = P.space;
    if (hs.element_state(elem.level, elem.index) != ElemState::Active)
        throw validation_error("element integrals: element is not active");

    double u0, u1, v0, v1;
    hs.element_box(elem, u0, u1, v0, v1);
    const double hu = u1 - u0;
    const double hv = v1 - v0;

    const int nloc = static_cast<int>(tab.B.front().size());
    if (K_bez) K_bez->setZero(nloc, nloc);
    if (rhs_bez) rhs_bez->setZero(nloc);

    Eigen::MatrixXd grads(2, nloc);
    for (int k = 0; k < tab.rule.size(); ++k) {
        const double xi = u0 + tab.rule.u[static_cast<std::size_t>(k)] * hu;
        const double eta = v0 + tab.rule.v[static_cast<std::size_t>(k)] * hv;
        Eigen::Matrix2d J;
        const Vec2 x = P.geometry.map(xi, eta, &J);
        const double detJ = J.determinant();
        if (detJ <= 0.0)
            throw geometry_error("non-positive geometry Jacobian on patch " +
                                 std::to_string(patch) + ", level " +
                                 std::to_string(elem.level) + ", element " +
                                 std::to_string(elem.index));
        const Eigen::Matrix2d invJT = J.inverse().transpose();
        for (int a = 0; a < nloc; ++a) {
            const Vec2 gpar(tab.dBu[static_cast<std::size_t>(k)][a] / hu,
                            tab.dBv[static_cast<std::size_t>(k)][a] / hv);
            grads.col(a) = invJT * gpar;
        }
        const double nu = problem.nu(x, mat);
        const double w = tab.rule.w[static_cast<std::size_t>(k)] * detJ * hu * hv;
        if (K_bez) K_bez->noalias() += (nu * w) * grads.transpose() * grads;
        if (rhs_bez) {
            const double f = problem.source ? problem.source(x, mat) : 0.0;
            for (int a = 0; a < nloc; ++a) {
                double val = f * tab.B[static_cast<std::size_t>(k)][a];
                val += magnetization_integrand(problem, x, mat, grads.col(a));
                (*rhs_bez)[a] += w * val;
            }
        }
    }
}

}  // namespace

void element_stiffness_bezier(const MultipatchDomain& domain, int patch, ElementId elem,
                              const PhysicsProblem& problem, Eigen::MatrixXd& K_bez,
                              Eigen::VectorXd& rhs_bez) {
    const TensorSpace2D& sp =
        domain.patches[static_cast<std::size_t>(patch)].space.level_space(elem.level);
    const int p = sp.u().degree();
    const int q = sp.v().degree();
    const BernsteinTable stiff = make_table(p, q, p + 1, q + 1);
    const BernsteinTable load = make_table(p, q, p + 2, q + 2);
    element_integrals(domain, patch, elem, problem, stiff, &K_bez, nullptr);
    element_integrals(domain, patch, elem, problem, load, nullptr, &rhs_bez);
}

Eigen::MatrixXd transform_element(const Eigen::MatrixXd& K_bez, const ExtractionOperator& C) {
    if (C.cols() != K_bez.rows() || K_bez.rows() != K_bez.cols())
        throw validation_error("transform_element: dimension mismatch between C^e (" +
                               std::to_string(C.rows()) + "x" + std::to_string(C.cols()) +
                               ") and K_Bezier (" + std::to_string(K_bez.rows()) + "x" +
                               std::to_string(K_bez.cols()) + ")");
    return C.mat * K_bez * C.mat.transpose();
}

LinearSystem assemble(const MultipatchDomain& domain, const PhysicsProblem& problem,
                      const DofMap& dofmap) {
    LinearSystem sys;
    sys.rhs = Eigen::VectorXd::Zero(dofmap.num_global);
    std::vector<Eigen::Triplet<double>> triplets;

    for (int patch = 0; patch < static_cast<int>(domain.patches.size()); ++patch) {
        const Patch& P = domain.patches[static_cast<std::size_t>(patch)];
        const TensorSpace2D& base = P.space.level_space(0);
        const int p = base.u().degree();
        const int q = base.v().degree();
        const BernsteinTable stiff = make_table(p, q, p + 1, q + 1);
        const BernsteinTable load = make_table(p, q, p + 2, q + 2);
        const auto& to_global = dofmap.to_global[static_cast<std::size_t>(patch)];

        Eigen::MatrixXd K_bez;
        Eigen::VectorXd rhs_bez;
        for (const ElementId& elem : P.space.active_elements()) {
            element_integrals(domain, patch, elem, problem, stiff, &K_bez, nullptr);
            element_integrals(domain, patch, elem, problem, load, nullptr, &rhs_bez);

            const ExtractionOperator& C = P.space.local_extraction(elem);
            const Eigen::MatrixXd K_e = transform_element(K_bez, C);
            const Eigen::VectorXd r_e = C.mat * rhs_bez;

            for (int a = 0; a < C.rows(); ++a) {
                const int ga = to_global[static_cast<std::size_t>(C.row_index[static_cast<std::size_t>(a)])];
                sys.rhs[ga] += r_e[a];
                for (int b = 0; b < C.rows(); ++b) {
                    const int gb =
                        to_global[static_cast<std::size_t>(C.row_index[static_cast<std::size_t>(b)])];
                    triplets.emplace_back(ga, gb, K_e(a, b));
                }
            }
        }
    }
    sys.K.resize(dofmap.num_global, dofmap.num_global);
    sys.K.setFromTriplets(triplets.begin(), triplets.end());
    sys.K.makeCompressed();
    return sys;
}

namespace {

// Prescribes `value` for a DOF, checking against an earlier prescription.
void prescribe(std::map<int, double>& values, int dof, double value) {
    const auto [it, inserted] = values.emplace(dof, value);
    if (!inserted && std::abs(it->second - value) > 1e-10 * (1.0 + std::abs(value)))
        throw validation_error(
            "apply_dirichlet: conflicting prescribed values at shared boundary DOF " +
            std::to_string(dof) + " (" + std::to_string(it->second) + " vs " +
            std::to_string(value) + ")");
}

}  // namespace

void apply_dirichlet(const MultipatchDomain& domain, const PhysicsProblem& problem,
                     const DofMap& dofmap, LinearSystem& sys) {
    std::map<int, double> values;

    for (const auto& [patch, side] : domain.boundary_sides()) {
        const Patch& P = domain.patches[static_cast<std::size_t>(patch)];
        const HierarchicalSpace& hs = P.space;
        const std::vector<SideFunction> funcs = trace_active_functions(hs, side);
        if (funcs.empty()) continue;
        const bool vertical = (side == Side::West || side == Side::East);

        // the corner DOFs are the unique trace-active end functions; they
        // interpolate g at the side's corners, the rest is L2-projected
        int corner_lo = -1;
        int corner_hi = -1;
        for (int k = 0; k < static_cast<int>(funcs.size()); ++k) {
            const SideFunction& sf = funcs[static_cast<std::size_t>(k)];
            const TensorSpace2D& sp = hs.level_space(sf.level);
            const SplineSpace1D& dir = vertical ? sp.v() : sp.u();
            if (sf.t == 0) {
                if (corner_lo >= 0)
                    throw internal_error("apply_dirichlet: multiple corner functions (lo)");
                corner_lo = k;
            }
            if (sf.t == dir.num_basis() - 1) {
                if (corner_hi >= 0)
                    throw internal_error("apply_dirichlet: multiple corner functions (hi)");
                corner_hi = k;
            }
        }
        if (corner_lo < 0 || corner_hi < 0)
            throw internal_error("apply_dirichlet: corner function not found");

        const TensorSpace2D& base = hs.level_space(0);
        const auto& dir_kv = vertical ? base.v().kv() : base.u().kv();
        const auto& perp_kv = vertical ? base.u().kv() : base.v().kv();
        const double perp_coord = (side == Side::West || side == Side::South)
                                      ? perp_kv.domain_min()
                                      : perp_kv.domain_max();
        const auto side_point = [&](double t) {
            return vertical ? std::pair<double, double>{perp_coord, t}
                            : std::pair<double, double>{t, perp_coord};
        };

        // corner interpolation
        const std::vector<double> ends = {dir_kv.domain_min(), dir_kv.domain_max()};
        const std::vector<int> corner_idx = {corner_lo, corner_hi};
        std::vector<double> corner_vals(2);
        for (int c = 0; c < 2; ++c) {
            const auto [xi, eta] = side_point(ends[static_cast<std::size_t>(c)]);
            const Vec2 x = P.geometry.map(xi, eta);
            corner_vals[static_cast<std::size_t>(c)] = problem.dirichlet(x);
            prescribe(values,
                      dofmap.global_of(domain, patch,
                                       funcs[static_cast<std::size_t>(
                                                 corner_idx[static_cast<std::size_t>(c)])]
                                           .f),
                      corner_vals[static_cast<std::size_t>(c)]);
        }

        // L2 projection of g onto the remaining trace functions
        std::vector<int> free;  // indices into funcs
        for (int k = 0; k < static_cast<int>(funcs.size()); ++k)
            if (k != corner_lo && k != corner_hi) free.push_back(k);
        if (free.empty()) continue;

        std::map<int, int> local_of;  // funcs index -> position in free
        for (int k = 0; k < static_cast<int>(free.size()); ++k)
            local_of[free[static_cast<std::size_t>(k)]] = k;
        std::map<int, int> funcs_by_dof;  // patch-ordinal dof -> funcs index
        for (int k = 0; k < static_cast<int>(funcs.size()); ++k)
            funcs_by_dof[hs.global_function_index(funcs[static_cast<std::size_t>(k)].f)] = k;

        Eigen::MatrixXd M = Eigen::MatrixXd::Zero(static_cast<int>(free.size()),
                                                  static_cast<int>(free.size()));
        Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<int>(free.size()));

        const int qn = (vertical ? base.v().degree() : base.u().degree()) + 2;
        const GaussRule1D& rule = gauss_rule_1d(qn);

        // quadrature over the active first-layer element edges, which tile
        // the side across levels
        for (int l = 0; l < hs.max_levels(); ++l) {
            const TensorSpace2D& sp = hs.level_space(l);
            const SplineSpace1D& dir = vertical ? sp.v() : sp.u();
            for (int e = 0; e < dir.num_elements(); ++e) {
                int layer_elem;
                switch (side) {
                    case Side::West: layer_elem = sp.flatten_elem(0, e); break;
                    case Side::East:
                        layer_elem = sp.flatten_elem(sp.u().num_elements() - 1, e);
                        break;
                    case Side::South: layer_elem = sp.flatten_elem(e, 0); break;
                    default: layer_elem = sp.flatten_elem(e, sp.v().num_elements() - 1); break;
                }
                if (hs.element_state(l, layer_elem) != ElemState::Active) continue;
                const auto [t0, t1] = dir.element_interval(e);
                for (std::size_t k = 0; k < rule.points.size(); ++k) {
                    const double t = t0 + rule.points[k] * (t1 - t0);
                    const auto [xi, eta] = side_point(t);
                    const HierEvalResult ev = hs.eval(xi, eta);
                    Eigen::Matrix2d J;
                    const Vec2 x = P.geometry.map(xi, eta, &J);
                    const Vec2 tangent = vertical ? Vec2(J(0, 1), J(1, 1)) : Vec2(J(0, 0), J(1, 0));
                    const double ds = tangent.norm() * (t1 - t0) * rule.weights[k];

                    // collect trace values of the side functions at this point
                    std::vector<std::pair<int, double>> tr;  // funcs index -> value
                    for (std::size_t a = 0; a < ev.functions.size(); ++a) {
                        const auto it = funcs_by_dof.find(
                            hs.global_function_index(ev.functions[a]));
                        if (it != funcs_by_dof.end())
                            tr.emplace_back(it->second, ev.values[static_cast<int>(a)]);
                    }
                    double g = problem.dirichlet(x);
                    for (const auto& [fi, val] : tr) {
                        if (fi == corner_lo) g -= corner_vals[0] * val;
                        if (fi == corner_hi) g -= corner_vals[1] * val;
                    }
                    for (const auto& [fi, va] : tr) {
                        const auto ia = local_of.find(fi);
                        if (ia == local_of.end()) continue;
                        b[ia->second] += ds * g * va;
                        for (const auto& [fj, vb] : tr) {
                            const auto ib = local_of.find(fj);
                            if (ib != local_of.end()) M(ia->second, ib->second) += ds * va * vb;
                        }
                    }
                }
            }
        }

        const Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
        if (ldlt.info() != Eigen::Success)
            throw solver_error("apply_dirichlet: singular boundary projection matrix");
        const Eigen::VectorXd sol = ldlt.solve(b);
        for (int k = 0; k < static_cast<int>(free.size()); ++k)
            prescribe(values,
                      dofmap.global_of(domain, patch,
                                       funcs[static_cast<std::size_t>(
                                                 free[static_cast<std::size_t>(k)])]
                                           .f),
                      sol[k]);
    }

    sys.dirichlet.assign(values.begin(), values.end());
}

Eigen::VectorXd solve(const LinearSystem& sys) {
    const int n = static_cast<int>(sys.K.rows());
    std::vector<int> reduced_of(static_cast<std::size_t>(n), -1);
    Eigen::VectorXd full = Eigen::VectorXd::Zero(n);
    for (const auto& [dof, val] : sys.dirichlet) full[dof] = val;

    int m = 0;
    {
        std::size_t next_constraint = 0;
        for (int i = 0; i < n; ++i) {
            if (next_constraint < sys.dirichlet.size() &&
                sys.dirichlet[next_constraint].first == i) {
                ++next_constraint;
                continue;
            }
            reduced_of[static_cast<std::size_t>(i)] = m++;
        }
    }

    Eigen::VectorXd rhs_red(m);
    for (int i = 0; i < n; ++i)
        if (reduced_of[static_cast<std::size_t>(i)] >= 0)
            rhs_red[reduced_of[static_cast<std::size_t>(i)]] = sys.rhs[i];

    std::vector<Eigen::Triplet<double>> triplets;
    for (int col = 0; col < sys.K.outerSize(); ++col) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(sys.K, col); it; ++it) {
            const int ri = reduced_of[static_cast<std::size_t>(it.row())];
            const int rj = reduced_of[static_cast<std::size_t>(it.col())];
            if (ri >= 0 && rj >= 0)
                triplets.emplace_back(ri, rj, it.value());
            else if (ri >= 0 && rj < 0)
                rhs_red[ri] -= it.value() * full[it.col()];
        }
    }
    Eigen::SparseMatrix<double> K_red(m, m);
    K_red.setFromTriplets(triplets.begin(), triplets.end());
    K_red.makeCompressed();

    Eigen::VectorXd x(m);
    if (m > 0) {
        const auto refine_and_check = [&](const auto& fact) {
            // a little iterative refinement keeps the residual contract on
            // ill-conditioned systems
            const double denom = rhs_red.norm();
            for (int pass = 0; pass < 3; ++pass) {
                const Eigen::VectorXd r = rhs_red - K_red * x;
                if (denom == 0.0 || r.norm() / denom <= 1e-13) break;
                x += fact.solve(r);
            }
            const double resid = (K_red * x - rhs_red).norm();
            if (denom > 0.0 && resid / denom > 1e-12)
                throw solver_error("solve: relative residual " + std::to_string(resid / denom) +
                                   " exceeds 1e-12");
        };
        if (sys.spd) {
            Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> fact(K_red);
            if (fact.info() != Eigen::Success)
                throw solver_error("solve: LDLT factorization failed (singular matrix?)");
            x = fact.solve(rhs_red);
            refine_and_check(fact);
        } else {
            Eigen::SparseLU<Eigen::SparseMatrix<double>> fact(K_red);
            if (fact.info() != Eigen::Success)
                throw solver_error("solve: LU factorization failed (singular matrix?)");
            x = fact.solve(rhs_red);
            refine_and_check(fact);
        }
    }

    for (int i = 0; i < n; ++i)
        if (reduced_of[static_cast<std::size_t>(i)] >= 0)
            full[i] = x[reduced_of[static_cast<std::size_t>(i)]];
    return full;
}

void dump_linear_system(const LinearSystem& sys, std::ostream& os) {
    std::vector<Eigen::Triplet<double>> entries;
    for (int col = 0; col < sys.K.outerSize(); ++col)
        for (Eigen::SparseMatrix<double>::InnerIterator it(sys.K, col); it; ++it)
            entries.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                                 it.value());
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
        return a.row() != b.row() ? a.row() < b.row() : a.col() < b.col();
    });
    char buf[32];
    for (const auto& t : entries) {
        std::snprintf(buf, sizeof buf, "%.17g", t.value());
        os << t.row() << ' ' << t.col() << ' ' << buf << "\n";
    }
    for (int i = 0; i < sys.rhs.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", sys.rhs[i]);
        os << "rhs " << i << ' ' << buf << "\n";
    }
}

}  // namespace thbx
