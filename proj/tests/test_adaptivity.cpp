#include <doctest.h>

#include <cmath>
#include <random>

#include "core/adaptivity.hpp"
#include "core/errors.hpp"
#include "core/quadrature.hpp"

using namespace thbx;

namespace {

MultipatchDomain unit_square_domain(int degree, int elems, int max_levels) {
    MultipatchDomain domain;
    Patch patch;
    patch.geometry = make_rectangle_geometry(0.0, 1.0, 0.0, 1.0);
    patch.material = "air";
    domain.patches.push_back(std::move(patch));
    domain.materials["air"] = MaterialParams{};
    build_solution_spaces(domain, degree, elems, max_levels);
    return domain;
}

PhysicsProblem manufactured(const std::function<double(const Vec2&)>& u,
                            const std::function<double(const Vec2&)>& minus_lap) {
    PhysicsProblem p;
    p.name = "manufactured";
    p.nu = [](const Vec2&, const MaterialParams&) { return 1.0; };
    p.source = [minus_lap](const Vec2& x, const MaterialParams&) { return minus_lap(x); };
    p.dirichlet = u;
    p.has_exact = true;
    p.exact = u;
    return p;
}

Eigen::VectorXd solve_direct(const MultipatchDomain& domain, const PhysicsProblem& problem,
                             DofMap& dofmap) {
    dofmap = build_dof_map(domain);
    LinearSystem sys = assemble(domain, problem, dofmap);
    apply_dirichlet(domain, problem, dofmap, sys);
    return solve(sys);
}

}  // namespace

TEST_CASE("two-mesh estimator") {
    SUBCASE("zero data: everything vanishes") {
        MultipatchDomain domain = unit_square_domain(2, 4, 2);
        const PhysicsProblem problem =
            manufactured([](const Vec2&) { return 0.0; }, [](const Vec2&) { return 0.0; });
        const TwoMeshEstimate est = estimate_two_mesh(domain, problem);
        CHECK(est.coarse_solution.norm() == 0.0);
        CHECK(est.error_function.norm() == 0.0);
        CHECK(est.indicators.total == 0.0);
        for (double eta : est.indicators.eta_sq) CHECK(eta == 0.0);
    }
    SUBCASE("exactly representable solution: estimator at rounding level") {
        MultipatchDomain domain = unit_square_domain(2, 4, 2);
        const PhysicsProblem problem = manufactured(
            [](const Vec2& x) { return x.x() * (1.0 - x.x()) * x.y() * (1.0 - x.y()); },
            [](const Vec2& x) {
                return 2.0 * x.y() * (1.0 - x.y()) + 2.0 * x.x() * (1.0 - x.x());
            });
        const TwoMeshEstimate est = estimate_two_mesh(domain, problem);
        CHECK(est.indicators.total < 1e-10);
    }
    SUBCASE("saddle identity: the u block equals the coarse Galerkin solve") {
        // polynomial data keeps the load quadrature exact on both meshes, so
        // the u block must match the direct coarse solve to solver accuracy
        MultipatchDomain domain = unit_square_domain(2, 4, 3);
        domain.patches[0].space = domain.patches[0].space.refine_elements({{0, 5}});
        const PhysicsProblem problem =
            manufactured([](const Vec2& x) { return x.x(); },
                         [](const Vec2& x) { return x.x() * x.x() * x.y() * x.y(); });
        const TwoMeshEstimate est = estimate_two_mesh(domain, problem);
        DofMap dofmap;
        const Eigen::VectorXd u_direct = solve_direct(domain, problem, dofmap);
        REQUIRE(u_direct.size() == est.coarse_solution.size());
        CHECK((u_direct - est.coarse_solution).norm() / u_direct.norm() < 1e-10);
    }
    SUBCASE("indicator totals equal the energy of the error function") {
        MultipatchDomain domain = unit_square_domain(2, 4, 3);
        domain.patches[0].space = domain.patches[0].space.refine_elements({{0, 5}});
        const PhysicsProblem problem = poisson_peak_problem();
        const TwoMeshEstimate est = estimate_two_mesh(domain, problem);
        REQUIRE(est.indicators.total > 0.0);

        SolutionField p{&est.fine_domain, &est.fine_dofmap, est.error_function};
        double acc = 0.0;
        const GaussRule2D rule = gauss_rule(4);
        for (const ElementId& e : est.fine_domain.patches[0].space.active_elements()) {
            double u0, u1, v0, v1;
            est.fine_domain.patches[0].space.element_box(e, u0, u1, v0, v1);
            for (int k = 0; k < rule.size(); ++k) {
                const double xi = u0 + rule.u[static_cast<std::size_t>(k)] * (u1 - u0);
                const double eta = v0 + rule.v[static_cast<std::size_t>(k)] * (v1 - v0);
                double val;
                Vec2 grad, pos;
                p.sample(0, xi, eta, val, grad, pos);
                acc += rule.w[static_cast<std::size_t>(k)] * (u1 - u0) * (v1 - v0) *
                       grad.squaredNorm();
            }
        }
        CHECK(std::abs(acc - est.indicators.total) / est.indicators.total < 1e-12);

        double sum = 0.0;
        for (double eta : est.indicators.eta_sq) {
            CHECK(eta >= 0.0);
            sum += eta;
        }
        CHECK(std::abs(sum - est.indicators.total) <= 1e-14 * est.indicators.total);
    }
}

TEST_CASE("doerfler marking") {
    ErrorIndicators ind;
    for (int k = 0; k < 10; ++k) {
        ind.elements.push_back({0, {0, k}});
        ind.eta_sq.push_back(1.0);
    }
    ind.total = 10.0;

    SUBCASE("theta near zero with one dominant element") {
        ErrorIndicators one = ind;
        one.eta_sq.assign(10, 0.0);
        one.eta_sq[7] = 5.0;
        one.total = 5.0;
        const auto marked = mark_doerfler(one, 1e-9);
        REQUIRE(marked.size() == 1);
        CHECK(marked[0].elem.index == 7);
    }
    SUBCASE("equal indicators: marked count is ceil(theta N)") {
        const auto marked = mark_doerfler(ind, 0.45);
        CHECK(marked.size() == 5);
        // brute force: no 4-element subset carries 45 percent of the mass
        double best = 0.0;
        for (int a = 0; a < 10; ++a)
            best = std::max(best, ind.eta_sq[static_cast<std::size_t>(a)]);
        CHECK(4.0 * best < 0.45 * ind.total);
    }
    SUBCASE("strongly peaked indicators") {
        ErrorIndicators peaked = ind;
        for (int k = 0; k < 10; ++k)
            peaked.eta_sq[static_cast<std::size_t>(k)] = std::pow(10.0, -k);
        peaked.total = 0.0;
        for (double e : peaked.eta_sq) peaked.total += e;
        const auto marked = mark_doerfler(peaked, 0.99);
        CHECK(marked.size() < 10);
        CHECK(marked.size() >= 2);
    }
    SUBCASE("greedy set is minimal") {
        std::mt19937 rng(17);
        std::uniform_real_distribution<double> mag(0.0, 1.0);
        ErrorIndicators rnd = ind;
        rnd.total = 0.0;
        for (int k = 0; k < 10; ++k) {
            rnd.eta_sq[static_cast<std::size_t>(k)] = mag(rng);
            rnd.total += rnd.eta_sq[static_cast<std::size_t>(k)];
        }
        const auto marked = mark_doerfler(rnd, 0.5);
        double sum = 0.0;
        double smallest = 1e300;
        for (const PatchElement& m : marked)
            for (std::size_t k = 0; k < rnd.elements.size(); ++k)
                if (rnd.elements[k] == m) {
                    sum += rnd.eta_sq[k];
                    smallest = std::min(smallest, rnd.eta_sq[k]);
                }
        CHECK(sum >= 0.5 * rnd.total);
        CHECK(sum - smallest < 0.5 * rnd.total);
    }
    SUBCASE("all-zero indicators mark nothing") {
        ErrorIndicators zero = ind;
        zero.eta_sq.assign(10, 0.0);
        zero.total = 0.0;
        CHECK(mark_doerfler(zero, 0.5).empty());
    }
    SUBCASE("theta outside (0,1) is rejected") {
        CHECK_THROWS_AS(mark_doerfler(ind, 0.0), validation_error);
        CHECK_THROWS_AS(mark_doerfler(ind, 1.0), validation_error);
    }
}

TEST_CASE("true-error marking against a reference") {
    MultipatchDomain initial = unit_square_domain(2, 4, 4);
    const PhysicsProblem problem = poisson_peak_problem();
    const ReferenceSolution ref = solve_reference(initial, problem, 2);

    SUBCASE("errors against itself are zero") {
        const ErrorIndicators errs =
            reference_element_errors(ref.domain, ref.dofmap, ref.coeffs, ref);
        CHECK(errs.total < 1e-24);
        CHECK(mark_true_error(errs, 1e-10).empty());
    }
    SUBCASE("tolerance extremes") {
        DofMap dofmap;
        const Eigen::VectorXd u = solve_direct(initial, problem, dofmap);
        const ErrorIndicators errs = reference_element_errors(initial, dofmap, u, ref);
        CHECK(errs.total > 0.0);
        CHECK(mark_true_error(errs, 1e300).empty());
        CHECK(mark_true_error(errs, 0.0).size() == errs.elements.size());
    }
    SUBCASE("a mesh deeper than the reference is rejected") {
        MultipatchDomain deep = initial;
        for (int i = 0; i < 3; ++i) deep = deep.refine_all();
        DofMap dofmap;
        const Eigen::VectorXd u = solve_direct(deep, problem, dofmap);
        CHECK_THROWS_AS(reference_element_errors(deep, dofmap, u, ref), validation_error);
    }
}

TEST_CASE("l2 error") {
    MultipatchDomain domain = unit_square_domain(2, 4, 1);
    SUBCASE("constant mismatch integrates to one") {
        const DofMap dofmap = build_dof_map(domain);
        const Eigen::VectorXd zero = Eigen::VectorXd::Zero(dofmap.num_global);
        const double err = l2_error_exact(domain, dofmap, zero, [](const Vec2&) { return 1.0; });
        CHECK(err == doctest::Approx(1.0).epsilon(1e-13));
    }
    SUBCASE("representable solutions are recovered to rounding") {
        const PhysicsProblem problem = manufactured(
            [](const Vec2& x) { return x.x() * (1.0 - x.x()) * x.y() * (1.0 - x.y()); },
            [](const Vec2& x) {
                return 2.0 * x.y() * (1.0 - x.y()) + 2.0 * x.x() * (1.0 - x.x());
            });
        DofMap dofmap;
        const Eigen::VectorXd u = solve_direct(domain, problem, dofmap);
        CHECK(l2_error_exact(domain, dofmap, u, problem.exact) < 1e-12);
    }
}

TEST_CASE("adaptive loop") {
    const PhysicsProblem problem = poisson_peak_problem();
    SUBCASE("zero iterations: a single record") {
        MultipatchDomain domain = unit_square_domain(2, 8, 4);
        AdaptiveConfig cfg;
        cfg.max_iterations = 0;
        const AdaptiveResult res = adaptive_loop(domain, problem, cfg);
        REQUIRE(res.records.size() == 1);
        CHECK(res.records[0].dofs == 100);
        CHECK(res.records[0].seconds == 0.0);
    }
    SUBCASE("estimator-driven refinement concentrates at the peak") {
        MultipatchDomain domain = unit_square_domain(2, 8, 5);
        AdaptiveConfig cfg;
        cfg.theta = 0.5;
        cfg.max_iterations = 3;
        cfg.max_levels = 5;
        const AdaptiveResult res = adaptive_loop(domain, problem, cfg);
        REQUIRE(res.records.size() == 4);
        for (std::size_t k = 1; k < res.records.size(); ++k) {
            CHECK(res.records[k].dofs > res.records[k - 1].dofs);
            CHECK(res.records[k].l2_error < res.records[k - 1].l2_error);
            CHECK(res.records[k].estimator_total < res.records[k - 1].estimator_total);
        }
        // refinement stays near the centre
        const HierarchicalSpace& hs = res.domain.patches[0].space;
        for (const ElementId& e : hs.active_elements()) {
            if (e.level == 0) continue;
            double u0, u1, v0, v1;
            hs.element_box(e, u0, u1, v0, v1);
            CHECK(u0 > 0.1);
            CHECK(u1 < 0.9);
            CHECK(v0 > 0.1);
            CHECK(v1 < 0.9);
        }
    }
    SUBCASE("mark-all reproduces the uniform driver") {
        MultipatchDomain domain = unit_square_domain(2, 4, 4);
        AdaptiveConfig cfg;
        cfg.max_iterations = 2;
        cfg.max_levels = 4;
        cfg.marking = MarkingMode::MarkAll;
        const AdaptiveResult adaptive = adaptive_loop(domain, problem, cfg);
        const AdaptiveResult uniform = uniform_refinement_loop(domain, problem, 2, cfg);
        REQUIRE(adaptive.records.size() == uniform.records.size());
        for (std::size_t k = 0; k < adaptive.records.size(); ++k) {
            CHECK(adaptive.records[k].dofs == uniform.records[k].dofs);
            CHECK(adaptive.records[k].elements == uniform.records[k].elements);
            CHECK(std::abs(adaptive.records[k].l2_error - uniform.records[k].l2_error) <=
                  1e-12 * uniform.records[k].l2_error);
        }
    }
    SUBCASE("records are deterministic across runs") {
        MultipatchDomain domain = unit_square_domain(2, 4, 4);
        AdaptiveConfig cfg;
        cfg.max_iterations = 2;
        const AdaptiveResult a = adaptive_loop(domain, problem, cfg);
        const AdaptiveResult b = adaptive_loop(domain, problem, cfg);
        REQUIRE(a.records.size() == b.records.size());
        for (std::size_t k = 0; k < a.records.size(); ++k) {
            CHECK(a.records[k].dofs == b.records[k].dofs);
            CHECK(a.records[k].l2_error == b.records[k].l2_error);
            CHECK(a.records[k].estimator_total == b.records[k].estimator_total);
        }
        CHECK((a.solution - b.solution).norm() == 0.0);
    }
}
