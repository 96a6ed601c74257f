#include <doctest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "core/errors.hpp"
#include "core/hierarchy.hpp"
#include "oracles.hpp"

using namespace thbx;

namespace {

TensorSpace2D biquadratic_base(int elems) {
    return TensorSpace2D(SplineSpace1D(make_uniform_knots(2, elems)),
                         SplineSpace1D(make_uniform_knots(2, elems)));
}

HierarchicalSpace random_thb(unsigned seed, int max_levels, int rounds, bool truncated = true) {
    HierarchicalSpace hs(biquadratic_base(4), max_levels, truncated);
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    for (int r = 0; r < rounds; ++r) {
        std::vector<ElementId> marked;
        for (const ElementId& e : hs.active_elements())
            if (e.level + 2 <= hs.max_levels() && coin(rng) < 0.3) marked.push_back(e);
        if (!marked.empty()) hs = hs.refine_elements(marked);
    }
    return hs;
}

}  // namespace

TEST_CASE("build_hierarchy: level grids and unrefined behaviour") {
    HierarchicalSpace hs(biquadratic_base(4), 3);
    CHECK(hs.level_space(0).num_elements() == 16);
    CHECK(hs.level_space(1).u().num_elements() == 8);
    CHECK(hs.level_space(1).num_elements() == 64);
    CHECK(hs.level_space(2).u().num_elements() == 16);
    CHECK(hs.level_space(2).num_elements() == 256);
    CHECK(hs.num_active_functions() == hs.level_space(0).num_basis());
    CHECK(hs.deepest_active_level() == 0);
    CHECK_THROWS_AS(HierarchicalSpace(biquadratic_base(2), 0), validation_error);

    // basis evaluation matches the plain tensor product space
    const TensorSpace2D& base = hs.level_space(0);
    std::mt19937 rng(2);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int t = 0; t < 20; ++t) {
        const double xi = unit(rng);
        const double eta = unit(rng);
        const HierEvalResult ev = hs.eval(xi, eta);
        double Nu[3], Nv[3];
        const int su = base.u().kv().eval_basis(xi, Nu);
        const int sv = base.v().kv().eval_basis(eta, Nv);
        REQUIRE(ev.functions.size() == 9);
        for (std::size_t k = 0; k < ev.functions.size(); ++k) {
            const auto [i, j] = base.unflatten(ev.functions[k].index);
            CHECK(ev.functions[k].level == 0);
            CHECK(ev.values[static_cast<int>(k)] ==
                  doctest::Approx(Nu[i - (su - 2)] * Nv[j - (sv - 2)]).epsilon(1e-14));
        }
    }
}

TEST_CASE("refine_elements: bookkeeping against the brute-force classifier") {
    HierarchicalSpace hs(biquadratic_base(4), 3);

    SUBCASE("refining nothing changes nothing") {
        const HierarchicalSpace same = hs.refine_elements({});
        CHECK(same.num_active_functions() == hs.num_active_functions());
        CHECK(same.active_elements() == hs.active_elements());
    }
    SUBCASE("marking an inactive element is an error") {
        CHECK_THROWS_AS(hs.refine_elements({{1, 0}}), validation_error);
        HierarchicalSpace r = hs.refine_elements({{0, 0}});
        CHECK_THROWS_AS(r.refine_elements({{0, 0}}), validation_error);
    }
    SUBCASE("refining everything reproduces the uniform level") {
        std::vector<ElementId> all;
        for (const ElementId& e : hs.active_elements()) all.push_back(e);
        const HierarchicalSpace uni = hs.refine_elements(all);
        CHECK(uni.active_functions(0).empty());
        CHECK(static_cast<int>(uni.active_functions(1).size()) ==
              uni.level_space(1).num_basis());
        CHECK(uni.num_active_elements() == 64);
    }
    SUBCASE("corner refinement matches the support-overlap oracle") {
        const HierarchicalSpace r = hs.refine_elements({{0, 0}});
        for (int l = 0; l < r.max_levels(); ++l) {
            const oracle::FunctionSets sets = oracle::classify_level(r, l);
            CHECK(r.active_functions(l) == sets.active);
            CHECK(r.deactivated_functions(l) == sets.deactivated);
        }
        // the corner function of level 0 lives on the refined element only
        CHECK(r.deactivated_functions(0) == std::vector<int>{0});
    }
    SUBCASE("random multi-level meshes match the oracle") {
        for (unsigned seed : {11u, 12u, 13u}) {
            const HierarchicalSpace r = random_thb(seed, 4, 3);
            for (int l = 0; l < r.max_levels(); ++l) {
                const oracle::FunctionSets sets = oracle::classify_level(r, l);
                CHECK(r.active_functions(l) == sets.active);
                CHECK(r.deactivated_functions(l) == sets.deactivated);
            }
        }
    }
    SUBCASE("exceeding max_levels is an error") {
        HierarchicalSpace two(biquadratic_base(2), 2);
        HierarchicalSpace r = two.refine_elements({{0, 0}});
        CHECK_THROWS_AS(r.refine_elements({{1, 0}}), validation_error);
    }
}

TEST_CASE("element covering invariant") {
    for (unsigned seed : {3u, 4u}) {
        const HierarchicalSpace hs = random_thb(seed, 4, 3);
        CHECK(std::abs(active_covered_area(hs) - 1.0) < 1e-14);
    }
}

TEST_CASE("truncate_coefficients") {
    HierarchicalSpace hs(biquadratic_base(4), 3);
    SUBCASE("no active functions on the next level: identity") {
        Eigen::VectorXd c = Eigen::VectorXd::Random(hs.level_space(1).num_basis());
        CHECK((hs.truncate_coefficients(0, c) - c).norm() == 0.0);
    }
    SUBCASE("fully refined: every child contribution is removed") {
        std::vector<ElementId> all;
        for (const ElementId& e : hs.active_elements()) all.push_back(e);
        const HierarchicalSpace uni = hs.refine_elements(all);
        const Eigen::VectorXd c = Eigen::VectorXd::Ones(uni.level_space(1).num_basis());
        CHECK(uni.truncate_coefficients(0, c).norm() == 0.0);
    }
    SUBCASE("wrong size is rejected") {
        Eigen::VectorXd c(3);
        CHECK_THROWS_AS(hs.truncate_coefficients(0, c), validation_error);
    }
}

TEST_CASE("THB partition of unity") {
    std::mt19937 rng(77);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    SUBCASE("corner refinement: coarse truncated plus fine sums to one") {
        HierarchicalSpace hs(biquadratic_base(4), 3);
        hs = hs.refine_elements({{0, 0}});
        for (int t = 0; t < 100; ++t) {
            const HierEvalResult ev = hs.eval(unit(rng), unit(rng));
            CHECK(std::abs(ev.values.sum() - 1.0) < 1e-12);
        }
    }
    SUBCASE("random configurations") {
        for (unsigned seed : {21u, 22u, 23u}) {
            const HierarchicalSpace hs = random_thb(seed, 4, 3);
            for (int t = 0; t < 200; ++t) {
                const HierEvalResult ev = hs.eval(unit(rng), unit(rng));
                CHECK(std::abs(ev.values.sum() - 1.0) < 1e-12);
            }
        }
    }
    SUBCASE("untruncated HB mode overlaps") {
        HierarchicalSpace hb = random_thb(21, 4, 3, false);
        double max_sum = 0.0;
        for (int t = 0; t < 200; ++t) {
            const HierEvalResult ev = hb.eval(unit(rng), unit(rng));
            max_sum = std::max(max_sum, ev.values.sum());
            CHECK(ev.values.sum() > 1.0 - 1e-12);  // HB sums dominate one
        }
        CHECK(max_sum > 1.0 + 1e-6);
    }
}

TEST_CASE("global multi-level operator") {
    SUBCASE("target level 0 is the identity on the active rows") {
        HierarchicalSpace hs(biquadratic_base(4), 3);
        const MultilevelOperator& M = hs.global_multilevel_operator(0);
        CHECK(M.num_cols == hs.level_space(0).num_basis());
        REQUIRE(static_cast<int>(M.rows.size()) == hs.num_active_functions());
        for (std::size_t r = 0; r < M.rows.size(); ++r) {
            REQUIRE(M.rows[r].cols.size() == 1);
            CHECK(M.rows[r].cols[0] == M.row_functions[r].index);
            CHECK(M.rows[r].vals[0] == 1.0);
        }
    }
    SUBCASE("unrefined two-level operator is the tensor subdivision") {
        HierarchicalSpace hs(biquadratic_base(4), 2);
        const MultilevelOperator& M = hs.global_multilevel_operator(1);
        const ExtractionOperator& Su = hs.subdivision_u(0);
        const ExtractionOperator& Sv = hs.subdivision_v(0);
        const TensorSpace2D& base = hs.level_space(0);
        const TensorSpace2D& fine = hs.level_space(1);
        for (std::size_t r = 0; r < M.rows.size(); ++r) {
            const auto [i, j] = base.unflatten(M.row_functions[r].index);
            Eigen::VectorXd dense = Eigen::VectorXd::Zero(fine.num_basis());
            for (std::size_t k = 0; k < M.rows[r].cols.size(); ++k)
                dense[M.rows[r].cols[k]] = M.rows[r].vals[k];
            for (int jf = 0; jf < fine.v().num_basis(); ++jf)
                for (int fi = 0; fi < fine.u().num_basis(); ++fi)
                    CHECK(std::abs(dense[fine.flatten(fi, jf)] -
                                   Su.mat(i, fi) * Sv.mat(j, jf)) < 1e-14);
        }
    }
    SUBCASE("rows reproduce the hierarchical functions (independent chain)") {
        HierarchicalSpace hs(biquadratic_base(4), 3);
        hs = hs.refine_elements({{0, 0}});
        std::mt19937 rng(5);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        const int L = hs.deepest_active_level();
        const MultilevelOperator& M = hs.global_multilevel_operator(L);
        const TensorSpace2D& deep = hs.level_space(L);
        for (int t = 0; t < 20; ++t) {
            const double xi = unit(rng);
            const double eta = unit(rng);
            double Nu[3], Nv[3];
            const int su = deep.u().kv().eval_basis(xi, Nu);
            const int sv = deep.v().kv().eval_basis(eta, Nv);
            for (std::size_t r = 0; r < M.rows.size(); ++r) {
                double via_row = 0.0;
                for (std::size_t k = 0; k < M.rows[r].cols.size(); ++k) {
                    const auto [fi, fj] = deep.unflatten(M.rows[r].cols[k]);
                    const int a = fi - (su - 2);
                    const int b = fj - (sv - 2);
                    if (a >= 0 && a <= 2 && b >= 0 && b <= 2)
                        via_row += M.rows[r].vals[k] * Nu[a] * Nv[b];
                }
                const double direct =
                    oracle::eval_function_direct(hs, M.row_functions[r], xi, eta);
                CHECK(std::abs(via_row - direct) < 1e-12);
            }
        }
    }
}

TEST_CASE("local extraction operator") {
    SUBCASE("unrefined: C^e is the tensor Bezier extraction") {
        HierarchicalSpace hs(biquadratic_base(4), 2);
        const auto eu = bezier_extraction(hs.level_space(0).u());
        const auto ev = bezier_extraction(hs.level_space(0).v());
        for (const ElementId& e : hs.active_elements()) {
            const ExtractionOperator& C = hs.local_extraction(e);
            const auto [ex, ey] = hs.level_space(0).unflatten_elem(e.index);
            REQUIRE(C.rows() == 9);
            for (int j = 0; j <= 2; ++j)
                for (int i = 0; i <= 2; ++i)
                    for (int bj = 0; bj <= 2; ++bj)
                        for (int bi = 0; bi <= 2; ++bi)
                            CHECK(std::abs(C.mat(j * 3 + i, bj * 3 + bi) -
                                           eu[static_cast<std::size_t>(ex)](i, bi) *
                                               ev[static_cast<std::size_t>(ey)](j, bj)) <
                                  1e-14);
        }
    }
    SUBCASE("requesting an inactive element is an error") {
        HierarchicalSpace hs(biquadratic_base(4), 2);
        CHECK_THROWS_AS(hs.local_extraction({1, 0}), validation_error);
    }
    SUBCASE("strip refinement: mixed-level support as in the univariate picture") {
        // refine the right three columns, then the right quarter: a level-2
        // element next to the level-1 region sees functions of both levels
        // and no surviving level-0 ones
        HierarchicalSpace hs(biquadratic_base(4), 3);
        std::vector<ElementId> marks;
        for (const ElementId& e : hs.active_elements()) {
            const auto [ex, ey] = hs.level_space(0).unflatten_elem(e.index);
            if (ex >= 1) marks.push_back(e);
        }
        hs = hs.refine_elements(marks);
        marks.clear();
        for (const ElementId& e : hs.active_elements()) {
            if (e.level != 1) continue;
            const auto [ex, ey] = hs.level_space(1).unflatten_elem(e.index);
            if (ex >= 6) marks.push_back(e);
        }
        hs = hs.refine_elements(marks);

        const TensorSpace2D& l2 = hs.level_space(2);
        const ElementId probe{2, l2.flatten_elem(12, 8)};
        REQUIRE(hs.element_state(probe.level, probe.index) == ElemState::Active);
        const std::vector<FunctionId> funcs = hs.functions_on_element(probe);
        std::map<int, int> per_level;
        for (const FunctionId& f : funcs) per_level[f.level]++;
        REQUIRE(per_level.count(1) == 1);
        REQUIRE(per_level.count(2) == 1);
        CHECK(per_level[1] + per_level[2] == static_cast<int>(funcs.size()));
        // u-direction support mixes 2 level-1 with 1 level-2 functions;
        // each tensorized with the 3 v-functions of its level
        CHECK(per_level[1] == 6);
        CHECK(per_level[2] == 3);

        double u0, u1, v0, v1;
        hs.element_box(probe, u0, u1, v0, v1);
        std::mt19937 rng(9);
        std::uniform_real_distribution<double> unit(0.05, 0.95);
        for (int t = 0; t < 10; ++t) {
            const double xi = u0 + unit(rng) * (u1 - u0);
            const double eta = v0 + unit(rng) * (v1 - v0);
            const HierEvalResult ev = hs.eval(xi, eta);
            REQUIRE(ev.functions == funcs);
            for (std::size_t k = 0; k < funcs.size(); ++k) {
                const double direct = oracle::eval_function_direct(hs, funcs[k], xi, eta);
                CHECK(std::abs(ev.values[static_cast<int>(k)] - direct) < 1e-12);
            }
        }
    }
    SUBCASE("column sums are one on a random 3-level THB mesh") {
        const HierarchicalSpace hs = random_thb(31, 3, 2);
        for (const ElementId& e : hs.active_elements()) {
            const ExtractionOperator& C = hs.local_extraction(e);
            for (int c = 0; c < C.cols(); ++c)
                CHECK(C.mat.col(c).sum() == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("extraction consistency: C^e B equals the independent chain") {
    for (unsigned seed : {41u, 42u}) {
        const HierarchicalSpace hs = random_thb(seed, 4, 3);
        std::mt19937 rng(seed + 100);
        std::uniform_real_distribution<double> unit(0.05, 0.95);
        for (const ElementId& e : hs.active_elements()) {
            double u0, u1, v0, v1;
            hs.element_box(e, u0, u1, v0, v1);
            for (int t = 0; t < 3; ++t) {
                const double xi = u0 + unit(rng) * (u1 - u0);
                const double eta = v0 + unit(rng) * (v1 - v0);
                const HierEvalResult ev = hs.eval(xi, eta);
                CHECK(ev.element == e);
                for (std::size_t k = 0; k < ev.functions.size(); ++k) {
                    const double direct =
                        oracle::eval_function_direct(hs, ev.functions[k], xi, eta);
                    CHECK(std::abs(ev.values[static_cast<int>(k)] - direct) < 1e-12);
                }
            }
        }
    }
}

TEST_CASE("hierarchical gradients match finite differences") {
    const HierarchicalSpace hs = random_thb(55, 3, 2);
    std::mt19937 rng(56);
    std::uniform_real_distribution<double> unit(0.1, 0.9);
    for (int t = 0; t < 20; ++t) {
        const double xi = unit(rng);
        const double eta = unit(rng);
        const HierEvalResult ev = hs.eval(xi, eta);
        CHECK(std::abs(ev.values.sum() - 1.0) < 1e-12);
        for (std::size_t k = 0; k < ev.functions.size(); ++k) {
            const FunctionId f = ev.functions[k];
            const double h = 1e-6;
            const double fd_u = (oracle::eval_function_direct(hs, f, xi + h, eta) -
                                 oracle::eval_function_direct(hs, f, xi - h, eta)) /
                                (2.0 * h);
            const double fd_v = (oracle::eval_function_direct(hs, f, xi, eta + h) -
                                 oracle::eval_function_direct(hs, f, xi, eta - h)) /
                                (2.0 * h);
            const double scale = std::max({1.0, std::abs(fd_u), std::abs(fd_v)});
            CHECK(std::abs(ev.grad_u[static_cast<int>(k)] - fd_u) / scale < 1e-5);
            CHECK(std::abs(ev.grad_v[static_cast<int>(k)] - fd_v) / scale < 1e-5);
        }
    }
}

TEST_CASE("from_active_elements round-trips refinement states") {
    const HierarchicalSpace hs = random_thb(61, 4, 3);
    std::vector<std::vector<int>> active(static_cast<std::size_t>(hs.max_levels()));
    for (int l = 0; l < hs.max_levels(); ++l)
        for (int e = 0; e < hs.level_space(l).num_elements(); ++e)
            if (hs.element_state(l, e) == ElemState::Active)
                active[static_cast<std::size_t>(l)].push_back(e);
    const HierarchicalSpace rebuilt =
        HierarchicalSpace::from_active_elements(hs.level_space(0), hs.max_levels(), active);
    CHECK(rebuilt.active_elements() == hs.active_elements());
    for (int l = 0; l < hs.max_levels(); ++l)
        CHECK(rebuilt.active_functions(l) == hs.active_functions(l));

    // a hole in the covering is rejected
    std::vector<std::vector<int>> broken = active;
    REQUIRE(!broken[1].empty());
    broken[1].pop_back();
    CHECK_THROWS_AS(
        HierarchicalSpace::from_active_elements(hs.level_space(0), hs.max_levels(), broken),
        validation_error);
}

TEST_CASE("extraction dump is stable (golden file)") {
    HierarchicalSpace hs(biquadratic_base(2), 3);
    hs = hs.refine_elements({{0, 3}});
    hs = hs.refine_elements({{1, 10}});
    std::ostringstream os;
    hs.dump_extraction(os);

    const std::string golden_path = std::string(THBX_GOLDEN_DIR) + "/extraction_dump.txt";
    std::ifstream in(golden_path);
    REQUIRE_MESSAGE(in.good(), "golden file missing: " << golden_path);
    std::ostringstream want;
    want << in.rdbuf();
    CHECK(os.str() == want.str());
}
