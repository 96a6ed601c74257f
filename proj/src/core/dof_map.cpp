#include "core/dof_map.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "core/errors.hpp"

namespace thbx {

namespace {

bool is_vertical(Side s) { return s == Side::West || s == Side::East; }

// flattened id of the band function with interface-direction index t
int band_function(const TensorSpace2D& sp, Side side, int t) {
    switch (side) {
        case Side::West: return sp.flatten(0, t);
        case Side::East: return sp.flatten(sp.u().num_basis() - 1, t);
        case Side::South: return sp.flatten(t, 0);
        case Side::North: return sp.flatten(t, sp.v().num_basis() - 1);
    }
    return -1;
}

// first-layer element at interface position e
int layer_element(const TensorSpace2D& sp, Side side, int e) {
    switch (side) {
        case Side::West: return sp.flatten_elem(0, e);
        case Side::East: return sp.flatten_elem(sp.u().num_elements() - 1, e);
        case Side::South: return sp.flatten_elem(e, 0);
        case Side::North: return sp.flatten_elem(e, sp.v().num_elements() - 1);
    }
    return -1;
}

// The trace of an active band function vanishes identically iff none of the
// side's first-layer elements inside its interface-direction support is
// active at the function's level.
bool trace_nonzero(const HierarchicalSpace& hs, Side side, int level, int t) {
    const TensorSpace2D& sp = hs.level_space(level);
    const SplineSpace1D& dir = is_vertical(side) ? sp.v() : sp.u();
    const auto [e_lo, e_hi] = dir.element_range_of_basis(t);
    for (int e = e_lo; e <= e_hi; ++e)
        if (hs.element_state(level, layer_element(sp, side, e)) == ElemState::Active) return true;
    return false;
}

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(static_cast<std::size_t>(n)) {
        std::iota(parent.begin(), parent.end(), 0);
    }
    int find(int x) {
        while (parent[static_cast<std::size_t>(x)] != x) {
            parent[static_cast<std::size_t>(x)] =
                parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
            x = parent[static_cast<std::size_t>(x)];
        }
        return x;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (b < a) std::swap(a, b);
        parent[static_cast<std::size_t>(b)] = a;
    }
};

}  // namespace

std::vector<SideFunction> trace_active_functions(const HierarchicalSpace& hs, Side side) {
    std::vector<SideFunction> out;
    for (int l = 0; l < hs.max_levels(); ++l) {
        const TensorSpace2D& sp = hs.level_space(l);
        const SplineSpace1D& dir = is_vertical(side) ? sp.v() : sp.u();
        for (int t = 0; t < dir.num_basis(); ++t) {
            const int flat = band_function(sp, side, t);
            if (!hs.is_active_function(l, flat)) continue;
            if (!trace_nonzero(hs, side, l, t)) continue;
            out.push_back({l, t, {l, flat}});
        }
    }
    return out;
}

DofMap build_dof_map(const MultipatchDomain& domain) {
    const int npatches = static_cast<int>(domain.patches.size());
    std::vector<int> offset(static_cast<std::size_t>(npatches) + 1, 0);
    for (int p = 0; p < npatches; ++p)
        offset[static_cast<std::size_t>(p) + 1] =
            offset[static_cast<std::size_t>(p)] +
            domain.patches[static_cast<std::size_t>(p)].space.num_active_functions();

    UnionFind uf(offset.back());
    double scale = 0.0;
    for (const Patch& patch : domain.patches)
        for (const Vec2& pt : patch.geometry.net.points)
            scale = std::max({scale, std::abs(pt.x()), std::abs(pt.y())});
    const double tol = 1e-10 * (1.0 + scale);

    for (const InterfaceGlue& g : domain.interfaces) {
        const HierarchicalSpace& ha = domain.patches[static_cast<std::size_t>(g.patch_a)].space;
        const HierarchicalSpace& hb = domain.patches[static_cast<std::size_t>(g.patch_b)].space;
        const std::string where = "interface (patch " + std::to_string(g.patch_a) + " " +
                                  side_name(g.side_a) + ") <-> (patch " +
                                  std::to_string(g.patch_b) + " " + side_name(g.side_b) + ")";
        const int levels = std::min(ha.max_levels(), hb.max_levels());
        for (int l = 0; l < levels; ++l) {
            const TensorSpace2D& sa = ha.level_space(l);
            const TensorSpace2D& sb = hb.level_space(l);
            const SplineSpace1D& da = is_vertical(g.side_a) ? sa.v() : sa.u();
            const SplineSpace1D& db = is_vertical(g.side_b) ? sb.v() : sb.u();
            if (da.num_basis() != db.num_basis())
                throw validation_error(where + ": traces have different dimensions at level " +
                                       std::to_string(l));
            const int n = da.num_basis();
            for (int ta = 0; ta < n; ++ta) {
                const int tb = g.reversed ? n - 1 - ta : ta;
                if (l == 0) {
                    // geometric anchor check catches wrong orientation flags
                    const Patch& A = domain.patches[static_cast<std::size_t>(g.patch_a)];
                    const Patch& B = domain.patches[static_cast<std::size_t>(g.patch_b)];
                    const double ga = da.greville(ta);
                    const double gb = db.greville(tb);
                    const Vec2 pa = is_vertical(g.side_a)
                                        ? A.geometry.map(g.side_a == Side::West
                                                             ? sa.u().kv().domain_min()
                                                             : sa.u().kv().domain_max(),
                                                         ga)
                                        : A.geometry.map(ga, g.side_a == Side::South
                                                                 ? sa.v().kv().domain_min()
                                                                 : sa.v().kv().domain_max());
                    const Vec2 pb = is_vertical(g.side_b)
                                        ? B.geometry.map(g.side_b == Side::West
                                                             ? sb.u().kv().domain_min()
                                                             : sb.u().kv().domain_max(),
                                                         gb)
                                        : B.geometry.map(gb, g.side_b == Side::South
                                                                 ? sb.v().kv().domain_min()
                                                                 : sb.v().kv().domain_max());
                    if ((pa - pb).norm() > tol)
                        throw validation_error(where + ": interface anchors do not coincide");
                }
                const int fa = band_function(sa, g.side_a, ta);
                const int fb = band_function(sb, g.side_b, tb);
                const bool aa = ha.is_active_function(l, fa) &&
                                trace_nonzero(ha, g.side_a, l, ta);
                const bool bb = hb.is_active_function(l, fb) &&
                                trace_nonzero(hb, g.side_b, l, tb);
                if (aa != bb)
                    throw validation_error(where + ": non-conforming interface at level " +
                                           std::to_string(l) +
                                           " (trace bases do not match); refinement must be "
                                           "mirrored across interfaces");
                if (aa)
                    uf.unite(offset[static_cast<std::size_t>(g.patch_a)] +
                                 ha.global_function_index({l, fa}),
                             offset[static_cast<std::size_t>(g.patch_b)] +
                                 hb.global_function_index({l, fb}));
            }
        }
    }

    DofMap map;
    map.to_global.resize(static_cast<std::size_t>(npatches));
    std::vector<int> root_to_id(static_cast<std::size_t>(offset.back()), -1);
    int next = 0;
    for (int p = 0; p < npatches; ++p) {
        const int count =
            domain.patches[static_cast<std::size_t>(p)].space.num_active_functions();
        map.to_global[static_cast<std::size_t>(p)].resize(static_cast<std::size_t>(count));
        for (int o = 0; o < count; ++o) {
            const int root = uf.find(offset[static_cast<std::size_t>(p)] + o);
            if (root_to_id[static_cast<std::size_t>(root)] < 0)
                root_to_id[static_cast<std::size_t>(root)] = next++;
            map.to_global[static_cast<std::size_t>(p)][static_cast<std::size_t>(o)] =
                root_to_id[static_cast<std::size_t>(root)];
        }
    }
    map.num_global = next;
    return map;
}

std::vector<int> dirichlet_dofs(const MultipatchDomain& domain, const DofMap& dofmap) {
    std::vector<int> out;
    for (const auto& [p, side] : domain.boundary_sides())
        for (const SideFunction& sf :
             trace_active_functions(domain.patches[static_cast<std::size_t>(p)].space, side))
            out.push_back(dofmap.global_of(domain, p, sf.f));
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

}  // namespace thbx
