#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "core/assembly.hpp"
#include "core/errors.hpp"
#include "core/quadrature.hpp"

using namespace thbx;

namespace {

// air box with a magnet block in the middle column, flux-wall boundary
MultipatchDomain magnet_box(int elems, int max_levels) {
    MultipatchDomain domain;
    const double xs[4] = {-1.5, -0.5, 0.5, 1.5};
    for (int c = 0; c < 3; ++c) {
        Patch p;
        p.geometry = make_rectangle_geometry(xs[c], xs[c + 1], 0.0, 1.0);
        p.material = (c == 1) ? "magnet" : "air";
        domain.patches.push_back(std::move(p));
    }
    domain.materials = magnetostatic_default_materials();
    domain.interfaces.push_back({0, Side::East, 1, Side::West, false});
    domain.interfaces.push_back({1, Side::East, 2, Side::West, false});
    build_solution_spaces(domain, 2, elems, max_levels);
    domain.validate();
    return domain;
}

Eigen::VectorXd solve_problem(const MultipatchDomain& domain, const PhysicsProblem& problem,
                              DofMap& dofmap) {
    dofmap = build_dof_map(domain);
    LinearSystem sys = assemble(domain, problem, dofmap);
    apply_dirichlet(domain, problem, dofmap, sys);
    return solve(sys);
}

MultipatchDomain unit_box(int elems) {
    MultipatchDomain domain;
    Patch patch;
    patch.geometry = make_rectangle_geometry(0.0, 1.0, 0.0, 1.0);
    patch.material = "air";
    domain.patches.push_back(std::move(patch));
    domain.materials["air"] = MaterialParams{};
    build_solution_spaces(domain, 2, elems, 1);
    return domain;
}

}  // namespace

TEST_CASE("poisson peak problem definition") {
    const PhysicsProblem p = poisson_peak_problem();
    REQUIRE(p.has_exact);
    CHECK(p.exact(Vec2(0.5, 0.5)) == doctest::Approx(1.0).epsilon(1e-15));
    // -lap u at the peak equals 4 alpha
    CHECK(p.source(Vec2(0.5, 0.5), MaterialParams{}) == doctest::Approx(400.0).epsilon(1e-13));
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int t = 0; t < 20; ++t) {
        const double x = unit(rng);
        const double y = unit(rng);
        CHECK(p.exact(Vec2(x, y)) == doctest::Approx(p.exact(Vec2(y, x))).epsilon(1e-14));
        CHECK(p.exact(Vec2(x, y)) == doctest::Approx(p.exact(Vec2(1.0 - x, y))).epsilon(1e-14));
        const Vec2 g = p.exact_grad(Vec2(x, y));
        const double h = 1e-6;
        CHECK(g.x() ==
              doctest::Approx((p.exact(Vec2(x + h, y)) - p.exact(Vec2(x - h, y))) / (2.0 * h))
                  .epsilon(1e-5));
    }
}

TEST_CASE("magnetostatic weak form") {
    SUBCASE("no remanence, no current: zero solution") {
        MultipatchDomain domain = magnet_box(2, 1);
        domain.materials["magnet"].br = Vec2::Zero();
        const PhysicsProblem problem = magnetostatic_problem();
        DofMap dofmap;
        const Eigen::VectorXd u = solve_problem(domain, problem, dofmap);
        CHECK(u.norm() == 0.0);
    }
    SUBCASE("manufactured biquadratic potential is reproduced exactly") {
        // A = x(1-x)y(1-y) with uniform mu: J_z = -nu lap A is exactly
        // representable in the biquadratic space
        MultipatchDomain domain = unit_box(3);
        const double nu0 = 1.0 / vacuum_permeability;
        PhysicsProblem problem = magnetostatic_problem();
        problem.source = [nu0](const Vec2& x, const MaterialParams&) {
            return nu0 * (2.0 * x.y() * (1.0 - x.y()) + 2.0 * x.x() * (1.0 - x.x()));
        };
        problem.remanence = nullptr;
        DofMap dofmap;
        const Eigen::VectorXd u = solve_problem(domain, problem, dofmap);
        SolutionField field{&domain, &dofmap, u};
        std::mt19937 rng(5);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (int t = 0; t < 20; ++t) {
            const double x = unit(rng);
            const double y = unit(rng);
            CHECK(std::abs(field.value(0, x, y) - x * (1.0 - x) * y * (1.0 - y)) < 1e-10);
        }
    }
    SUBCASE("manufactured solution converges at rate p+1 for p=1") {
        PhysicsProblem problem = magnetostatic_problem();
        problem.source = [](const Vec2& x, const MaterialParams&) {
            return 2.0 * M_PI * M_PI / vacuum_permeability * std::sin(M_PI * x.x()) *
                   std::sin(M_PI * x.y());
        };
        problem.remanence = nullptr;
        problem.has_exact = true;
        problem.exact = [](const Vec2& x) {
            return std::sin(M_PI * x.x()) * std::sin(M_PI * x.y());
        };
        std::vector<double> errs;
        for (int elems : {8, 16, 32}) {
            MultipatchDomain domain;
            Patch patch;
            patch.geometry = make_rectangle_geometry(0.0, 1.0, 0.0, 1.0);
            patch.material = "air";
            domain.patches.push_back(std::move(patch));
            domain.materials["air"] = MaterialParams{};
            build_solution_spaces(domain, 1, elems, 1);
            DofMap dofmap;
            const Eigen::VectorXd u = solve_problem(domain, problem, dofmap);
            SolutionField field{&domain, &dofmap, u};
            const GaussRule2D rule = gauss_rule(3);
            double acc = 0.0;
            const double h = 1.0 / elems;
            for (int ey = 0; ey < elems; ++ey)
                for (int ex = 0; ex < elems; ++ex)
                    for (int k = 0; k < rule.size(); ++k) {
                        const double xi = (ex + rule.u[static_cast<std::size_t>(k)]) * h;
                        const double eta = (ey + rule.v[static_cast<std::size_t>(k)]) * h;
                        const double diff =
                            field.value(0, xi, eta) - problem.exact(Vec2(xi, eta));
                        acc += rule.w[static_cast<std::size_t>(k)] * h * h * diff * diff;
                    }
            errs.push_back(std::sqrt(acc));
        }
        const double rate = std::log2(errs[1] / errs[2]);
        CHECK(rate > 1.7);
        CHECK(rate < 2.3);
    }
    SUBCASE("flipping the remanence flips the solution exactly") {
        MultipatchDomain domain = magnet_box(2, 1);
        const PhysicsProblem problem = magnetostatic_problem();
        DofMap dofmap;
        const Eigen::VectorXd u_plus = solve_problem(domain, problem, dofmap);
        domain.materials["magnet"].br = -domain.materials["magnet"].br;
        const Eigen::VectorXd u_minus = solve_problem(domain, problem, dofmap);
        REQUIRE(u_plus.norm() > 0.0);
        CHECK((u_plus + u_minus).norm() / u_plus.norm() < 1e-12);
    }
    SUBCASE("solution scales linearly in the sources") {
        MultipatchDomain domain = magnet_box(2, 1);
        domain.materials["magnet"].jz = 1e3;
        const PhysicsProblem problem = magnetostatic_problem();
        DofMap dofmap;
        const Eigen::VectorXd u1 = solve_problem(domain, problem, dofmap);
        domain.materials["magnet"].br *= 2.0;
        domain.materials["magnet"].jz *= 2.0;
        const Eigen::VectorXd u2 = solve_problem(domain, problem, dofmap);
        CHECK((u2 - 2.0 * u1).norm() / u2.norm() < 1e-12);
    }
    SUBCASE("magnetization term only acts where B_r is set") {
        const PhysicsProblem problem = magnetostatic_problem();
        MaterialParams air{1.0, Vec2::Zero(), 0.0};
        MaterialParams magnet{1.05, Vec2(0.0, 1.2), 0.0};
        CHECK(magnetization_integrand(problem, Vec2(0, 0), air, Vec2(1.0, 1.0)) == 0.0);
        const double nu = 1.0 / (vacuum_permeability * 1.05);
        CHECK(magnetization_integrand(problem, Vec2(0, 0), magnet, Vec2(1.0, 0.0)) ==
              doctest::Approx(-1.2 * nu).epsilon(1e-14));
    }
}

TEST_CASE("horseshoe domain loads and validates") {
    const MultipatchDomain domain =
        horseshoe_domain(std::string(THBX_DATA_DIR) + "/horseshoe30.geo");
    CHECK(domain.patches.size() == 30);
    std::set<std::string> tags;
    for (const Patch& p : domain.patches) tags.insert(p.material);
    CHECK(tags == std::set<std::string>{"air", "iron", "magnet"});
    CHECK(domain.materials.at("iron").mu_r == 2000.0);
    CHECK(domain.materials.at("magnet").br.y() == 1.2);
    CHECK(domain.interfaces.size() == 49);

    MultipatchDomain d = domain;
    build_solution_spaces(d, 2, 2, 3);
    CHECK_NOTHROW(d.validate());
    CHECK(d.boundary_sides().size() == 4 * 30 - 2 * 49);
    CHECK_THROWS_AS(horseshoe_domain("/nonexistent/path.geo"), io_error);
}

TEST_CASE("postprocessing to the flux density") {
    SUBCASE("constant potential: B vanishes") {
        MultipatchDomain domain = unit_box(2);
        const DofMap dofmap = build_dof_map(domain);
        SolutionField field{&domain, &dofmap, Eigen::VectorXd::Ones(dofmap.num_global)};
        const auto samples = postprocess_B(field, 0, 5);
        REQUIRE(samples.size() == 25);
        for (const FieldSample& s : samples) {
            CHECK(s.az == doctest::Approx(1.0).epsilon(1e-13));
            CHECK(s.b.norm() < 1e-12);
        }
        CHECK_THROWS_AS(postprocess_B(field, 0, 1), validation_error);
    }
    SUBCASE("A = y gives the unit horizontal field") {
        MultipatchDomain domain = unit_box(3);
        PhysicsProblem problem = magnetostatic_problem();
        problem.dirichlet = [](const Vec2& x) { return x.y(); };
        DofMap dofmap;
        const Eigen::VectorXd u = solve_problem(domain, problem, dofmap);
        SolutionField field{&domain, &dofmap, u};
        for (const FieldSample& s : postprocess_B(field, 0, 7)) {
            CHECK(s.b.x() == doctest::Approx(1.0).epsilon(1e-10));
            CHECK(std::abs(s.b.y()) < 1e-10);
        }
    }
    SUBCASE("flux wall: no net flux crosses the boundary") {
        MultipatchDomain domain = magnet_box(2, 1);
        const PhysicsProblem problem = magnetostatic_problem();
        DofMap dofmap;
        const Eigen::VectorXd u = solve_problem(domain, problem, dofmap);
        SolutionField field{&domain, &dofmap, u};
        // int B.n ds along the outer boundary: the circulation of grad A_z
        // telescopes to zero on a flux wall
        double net = 0.0;
        double total_abs = 0.0;
        const GaussRule1D& rule = gauss_rule_1d(4);
        for (const auto& [p, side] : domain.boundary_sides()) {
            for (int e = 0; e < 4; ++e) {
                for (std::size_t q = 0; q < rule.points.size(); ++q) {
                    const double t = (e + rule.points[q]) / 4.0;
                    double xi = t, eta = t;
                    Vec2 normal;
                    switch (side) {
                        case Side::West: xi = 0.0; normal = Vec2(-1, 0); break;
                        case Side::East: xi = 1.0; normal = Vec2(1, 0); break;
                        case Side::South: eta = 0.0; normal = Vec2(0, -1); break;
                        case Side::North: eta = 1.0; normal = Vec2(0, 1); break;
                    }
                    double val;
                    Vec2 grad, pos;
                    field.sample(p, xi, eta, val, grad, pos);
                    const Vec2 b(grad.y(), -grad.x());
                    Eigen::Matrix2d J;
                    domain.patches[static_cast<std::size_t>(p)].geometry.map(xi, eta, &J);
                    const double ds =
                        (side == Side::West || side == Side::East ? J.col(1) : J.col(0))
                            .norm() /
                        4.0;
                    net += rule.weights[q] * ds * b.dot(normal);
                    total_abs += rule.weights[q] * ds * std::abs(b.dot(normal));
                }
            }
        }
        CHECK(std::abs(net) < 1e-10 * (1.0 + total_abs));
    }
}
