#include "core/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <ostream>
#include <set>
#include <sstream>

#include "core/errors.hpp"

namespace thbx {

const char* side_name(Side s) {
    switch (s) {
        case Side::West: return "west";
        case Side::East: return "east";
        case Side::South: return "south";
        case Side::North: return "north";
    }
    return "?";
}

Side side_from_name(const std::string& name) {
    if (name == "west") return Side::West;
    if (name == "east") return Side::East;
    if (name == "south") return Side::South;
    if (name == "north") return Side::North;
    throw validation_error("unknown side name '" + name + "' (expected west/east/south/north)");
}

namespace {

// number of elements along the interface direction of a side, at a level
int interface_elem_count(const HierarchicalSpace& hs, int level, Side s) {
    const TensorSpace2D& sp = hs.level_space(level);
    return (s == Side::West || s == Side::East) ? sp.v().num_elements() : sp.u().num_elements();
}

// first-layer element of a side at interface position t
int layer_element(const TensorSpace2D& sp, Side s, int t) {
    switch (s) {
        case Side::West: return sp.flatten_elem(0, t);
        case Side::East: return sp.flatten_elem(sp.u().num_elements() - 1, t);
        case Side::South: return sp.flatten_elem(t, 0);
        case Side::North: return sp.flatten_elem(t, sp.v().num_elements() - 1);
    }
    return -1;
}

// interface position of an element if it lies in the first layer of the side
bool layer_position(const TensorSpace2D& sp, Side s, int elem, int& t) {
    const auto [ex, ey] = sp.unflatten_elem(elem);
    switch (s) {
        case Side::West: t = ey; return ex == 0;
        case Side::East: t = ey; return ex == sp.u().num_elements() - 1;
        case Side::South: t = ex; return ey == 0;
        case Side::North: t = ex; return ey == sp.v().num_elements() - 1;
    }
    return false;
}

// point on a side at normalized interface parameter t in [0, 1]
void side_param(const TensorSpace2D& sp, Side s, double t, double& xi, double& eta) {
    const auto& u = sp.u().kv();
    const auto& v = sp.v().kv();
    const double uu = u.domain_min() + t * (u.domain_max() - u.domain_min());
    const double vv = v.domain_min() + t * (v.domain_max() - v.domain_min());
    switch (s) {
        case Side::West: xi = u.domain_min(); eta = vv; break;
        case Side::East: xi = u.domain_max(); eta = vv; break;
        case Side::South: xi = uu; eta = v.domain_min(); break;
        case Side::North: xi = uu; eta = v.domain_max(); break;
    }
}

}  // namespace

const MaterialParams& MultipatchDomain::material_of(int patch) const {
    const auto it = materials.find(patches[static_cast<std::size_t>(patch)].material);
    if (it == materials.end())
        throw validation_error("material table has no entry for tag '" +
                               patches[static_cast<std::size_t>(patch)].material + "'");
    return it->second;
}

bool MultipatchDomain::is_interface_side(int patch, Side s) const {
    for (const InterfaceGlue& g : interfaces) {
        if (g.patch_a == patch && g.side_a == s) return true;
        if (g.patch_b == patch && g.side_b == s) return true;
    }
    return false;
}

std::vector<std::pair<int, Side>> MultipatchDomain::boundary_sides() const {
    std::vector<std::pair<int, Side>> out;
    for (int p = 0; p < static_cast<int>(patches.size()); ++p)
        for (Side s : {Side::West, Side::East, Side::South, Side::North})
            if (!is_interface_side(p, s)) out.emplace_back(p, s);
    return out;
}

void MultipatchDomain::validate() const {
    if (patches.empty()) throw validation_error("domain: needs at least one patch");
    double scale = 0.0;
    for (std::size_t k = 0; k < patches.size(); ++k) {
        const Patch& patch = patches[k];
        if (static_cast<int>(patch.geometry.net.points.size()) !=
            patch.geometry.space.num_basis())
            throw validation_error("patch " + std::to_string(k) +
                                   ": control net size does not match geometry space");
        if (materials.find(patch.material) == materials.end())
            throw validation_error("patch " + std::to_string(k) + ": material tag '" +
                                   patch.material + "' missing from material table");
        for (const Vec2& pt : patch.geometry.net.points)
            scale = std::max({scale, std::abs(pt.x()), std::abs(pt.y())});
        // geometry orientation spot check
        for (double a : {0.1, 0.5, 0.9})
            for (double b : {0.1, 0.5, 0.9}) {
                const auto& su = patch.geometry.space.u().kv();
                const auto& sv = patch.geometry.space.v().kv();
                Eigen::Matrix2d J;
                patch.geometry.map(su.domain_min() + a * (su.domain_max() - su.domain_min()),
                                   sv.domain_min() + b * (sv.domain_max() - sv.domain_min()), &J);
                if (J.determinant() <= 0.0)
                    throw validation_error("patch " + std::to_string(k) +
                                           ": geometry Jacobian not positive");
            }
    }
    for (const auto& [tag, mat] : materials)
        if (!(mat.mu_r > 0.0))
            throw validation_error("material '" + tag + "': mu_r must be positive");

    const double tol = 1e-12 * (1.0 + scale);
    std::set<std::pair<int, Side>> used;
    for (const InterfaceGlue& g : interfaces) {
        if (g.patch_a < 0 || g.patch_a >= static_cast<int>(patches.size()) || g.patch_b < 0 ||
            g.patch_b >= static_cast<int>(patches.size()))
            throw validation_error("interface: patch index out of range");
        if (g.patch_a == g.patch_b && g.side_a == g.side_b)
            throw validation_error("interface: cannot glue a side to itself");
        for (auto key : {std::pair<int, Side>{g.patch_a, g.side_a},
                         std::pair<int, Side>{g.patch_b, g.side_b}})
            if (!used.insert(key).second)
                throw validation_error("interface: patch " + std::to_string(key.first) +
                                       " side " + side_name(key.second) +
                                       " appears in more than one interface");

        const Patch& A = patches[static_cast<std::size_t>(g.patch_a)];
        const Patch& B = patches[static_cast<std::size_t>(g.patch_b)];
        const std::string where = "interface (patch " + std::to_string(g.patch_a) + " " +
                                  side_name(g.side_a) + ") <-> (patch " +
                                  std::to_string(g.patch_b) + " " + side_name(g.side_b) + ")";
        if (A.space.max_levels() > 0 && B.space.max_levels() > 0) {
            const TensorSpace2D& sa = A.space.level_space(0);
            const TensorSpace2D& sb = B.space.level_space(0);
            const int da = (g.side_a == Side::West || g.side_a == Side::East)
                               ? sa.v().degree()
                               : sa.u().degree();
            const int db = (g.side_b == Side::West || g.side_b == Side::East)
                               ? sb.v().degree()
                               : sb.u().degree();
            if (da != db)
                throw validation_error(where + ": solution degrees differ along the interface");
            if (interface_elem_count(A.space, 0, g.side_a) !=
                interface_elem_count(B.space, 0, g.side_b))
                throw validation_error(where + ": element counts differ along the interface");
        }
        for (int k = 0; k <= 8; ++k) {
            const double t = k / 8.0;
            const double tb = g.reversed ? 1.0 - t : t;
            double xa, ya, xb, yb;
            side_param(A.geometry.space, g.side_a, t, xa, ya);
            side_param(B.geometry.space, g.side_b, tb, xb, yb);
            const Vec2 pa = A.geometry.map(xa, ya);
            const Vec2 pb = B.geometry.map(xb, yb);
            if ((pa - pb).norm() > tol)
                throw validation_error(where + ": side geometries do not coincide (gap " +
                                       std::to_string((pa - pb).norm()) + ")");
        }
    }
}

std::vector<PatchElement> MultipatchDomain::close_marks(
    const std::vector<PatchElement>& marked) const {
    // simulated element states so the closure can reason about the mesh
    // after all pending refinements
    std::vector<std::vector<std::vector<ElemState>>> sim(patches.size());
    for (std::size_t p = 0; p < patches.size(); ++p) {
        const HierarchicalSpace& hs = patches[p].space;
        sim[p].resize(static_cast<std::size_t>(hs.max_levels()));
        for (int l = 0; l < hs.max_levels(); ++l) {
            const int nel = hs.level_space(l).num_elements();
            sim[p][static_cast<std::size_t>(l)].resize(static_cast<std::size_t>(nel));
            for (int e = 0; e < nel; ++e)
                sim[p][static_cast<std::size_t>(l)][static_cast<std::size_t>(e)] =
                    hs.element_state(l, e);
        }
    }

    std::set<PatchElement> result;
    std::function<void(int, ElementId)> ensure_refined = [&](int p, ElementId e) {
        auto& states = sim[static_cast<std::size_t>(p)];
        const HierarchicalSpace& hs = patches[static_cast<std::size_t>(p)].space;
        ElemState st = states[static_cast<std::size_t>(e.level)][static_cast<std::size_t>(e.index)];
        if (st == ElemState::Refined) return;
        const TensorSpace2D& sp = hs.level_space(e.level);
        if (st == ElemState::Inactive) {
            if (e.level == 0)
                throw internal_error("close_marks: uncovered level-0 element");
            const auto [ex, ey] = sp.unflatten_elem(e.index);
            const TensorSpace2D& coarse = hs.level_space(e.level - 1);
            ensure_refined(p, {e.level - 1, coarse.flatten_elem(ex / 2, ey / 2)});
            st = states[static_cast<std::size_t>(e.level)][static_cast<std::size_t>(e.index)];
        }
        if (st != ElemState::Active)
            throw internal_error("close_marks: expected simulated-active element");
        if (e.level + 1 >= hs.max_levels())
            throw validation_error("close_marks: refinement of patch " + std::to_string(p) +
                                   " level " + std::to_string(e.level) +
                                   " would exceed max_levels");
        result.insert({p, e});
        states[static_cast<std::size_t>(e.level)][static_cast<std::size_t>(e.index)] =
            ElemState::Refined;
        const TensorSpace2D& fine = hs.level_space(e.level + 1);
        const auto [ex, ey] = sp.unflatten_elem(e.index);
        for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx)
                states[static_cast<std::size_t>(e.level) + 1][static_cast<std::size_t>(
                    fine.flatten_elem(2 * ex + dx, 2 * ey + dy))] = ElemState::Active;

        // mirror onto glued neighbours when the element touches an interface
        for (const InterfaceGlue& g : interfaces) {
            for (int pass = 0; pass < 2; ++pass) {
                const int from = pass == 0 ? g.patch_a : g.patch_b;
                const Side sfrom = pass == 0 ? g.side_a : g.side_b;
                const int to = pass == 0 ? g.patch_b : g.patch_a;
                const Side sto = pass == 0 ? g.side_b : g.side_a;
                if (from != p) continue;
                int t;
                if (!layer_position(sp, sfrom, e.index, t)) continue;
                const HierarchicalSpace& other = patches[static_cast<std::size_t>(to)].space;
                const int n = interface_elem_count(other, e.level, sto);
                const int tt = g.reversed ? n - 1 - t : t;
                ensure_refined(to, {e.level, layer_element(other.level_space(e.level), sto, tt)});
            }
        }
    };

    std::vector<PatchElement> sorted = marked;
    std::sort(sorted.begin(), sorted.end());
    for (const PatchElement& m : sorted) ensure_refined(m.patch, m.elem);
    return {result.begin(), result.end()};
}

MultipatchDomain MultipatchDomain::refine(const std::vector<PatchElement>& marked) const {
    const std::vector<PatchElement> closed = close_marks(marked);
    MultipatchDomain out = *this;
    std::vector<std::vector<ElementId>> per_patch(patches.size());
    for (const PatchElement& m : closed)
        per_patch[static_cast<std::size_t>(m.patch)].push_back(m.elem);
    for (std::size_t p = 0; p < patches.size(); ++p)
        if (!per_patch[p].empty())
            out.patches[p].space = patches[p].space.refine_elements(per_patch[p]);
    return out;
}

MultipatchDomain MultipatchDomain::refine_all() const {
    std::vector<PatchElement> all;
    for (int p = 0; p < static_cast<int>(patches.size()); ++p)
        for (const ElementId& e : patches[static_cast<std::size_t>(p)].space.active_elements())
            all.push_back({p, e});
    return refine(all);
}

int MultipatchDomain::num_active_elements() const {
    int n = 0;
    for (const Patch& p : patches) n += p.space.num_active_elements();
    return n;
}

std::vector<int> MultipatchDomain::active_elements_per_level() const {
    std::vector<int> out;
    for (const Patch& p : patches) {
        const auto counts = p.space.active_elements_per_level();
        if (counts.size() > out.size()) out.resize(counts.size(), 0);
        for (std::size_t l = 0; l < counts.size(); ++l) out[l] += counts[l];
    }
    return out;
}

int MultipatchDomain::deepest_active_level() const {
    int deepest = 0;
    for (const Patch& p : patches) deepest = std::max(deepest, p.space.deepest_active_level());
    return deepest;
}

void build_solution_spaces(MultipatchDomain& domain, int degree, int initial_elements,
                           int max_levels, bool truncated) {
    for (Patch& patch : domain.patches) {
        const auto& gu = patch.geometry.space.u().kv();
        const auto& gv = patch.geometry.space.v().kv();
        TensorSpace2D base(
            SplineSpace1D(make_uniform_knots(degree, initial_elements, gu.domain_min(),
                                             gu.domain_max())),
            SplineSpace1D(make_uniform_knots(degree, initial_elements, gv.domain_min(),
                                             gv.domain_max())));
        patch.space = HierarchicalSpace(base, max_levels, truncated);
    }
}

PatchGeometry make_rectangle_geometry(double x0, double x1, double y0, double y1,
                                      int geo_degree) {
    PatchGeometry geo;
    geo.space = TensorSpace2D(SplineSpace1D(make_uniform_knots(geo_degree, 1)),
                              SplineSpace1D(make_uniform_knots(geo_degree, 1)));
    const int n = geo.space.u().num_basis();
    const int m = geo.space.v().num_basis();
    geo.net.points.resize(static_cast<std::size_t>(n * m));
    for (int j = 0; j < m; ++j)
        for (int i = 0; i < n; ++i) {
            const double gu = geo.space.u().greville(i);
            const double gv = geo.space.v().greville(j);
            geo.net.points[static_cast<std::size_t>(geo.space.flatten(i, j))] =
                Vec2(x0 + gu * (x1 - x0), y0 + gv * (y1 - y0));
        }
    return geo;
}

// ---------------------------------------------------------------------------
// geometry file IO
// ---------------------------------------------------------------------------

namespace {

class TokenReader {
public:
    explicit TokenReader(std::istream& is) : is_(is) {}

    std::string next() {
        std::string tok;
        while (is_ >> tok) {
            if (tok[0] == '#') {
                std::string rest;
                std::getline(is_, rest);
                continue;
            }
            return tok;
        }
        throw io_error("geometry file: unexpected end of file");
    }

    double next_real() {
        const std::string tok = next();
        try {
            std::size_t used = 0;
            const double v = std::stod(tok, &used);
            if (used != tok.size()) throw std::invalid_argument(tok);
            return v;
        } catch (const std::exception&) {
            throw io_error("geometry file: expected a number, got '" + tok + "'");
        }
    }

    int next_int() {
        const double v = next_real();
        const int i = static_cast<int>(v);
        if (static_cast<double>(i) != v)
            throw io_error("geometry file: expected an integer");
        return i;
    }

    void expect(const std::string& kw) {
        const std::string tok = next();
        if (tok != kw)
            throw io_error("geometry file: expected '" + kw + "', got '" + tok + "'");
    }

private:
    std::istream& is_;
};

}  // namespace

MultipatchDomain read_geometry_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw io_error("geometry file: cannot open '" + path + "'");
    TokenReader r(is);

    MultipatchDomain domain;
    r.expect("patches");
    const int npatches = r.next_int();
    if (npatches < 1) throw io_error("geometry file: patch count must be positive");
    for (int k = 0; k < npatches; ++k) {
        r.expect("patch");
        if (r.next_int() != k) throw io_error("geometry file: patches must be numbered in order");
        r.expect("degree");
        const int p = r.next_int();
        const int q = r.next_int();
        r.expect("knots_u");
        const int cu = r.next_int();
        std::vector<double> ku(static_cast<std::size_t>(cu));
        for (double& v : ku) v = r.next_real();
        r.expect("knots_v");
        const int cv = r.next_int();
        std::vector<double> kvv(static_cast<std::size_t>(cv));
        for (double& v : kvv) v = r.next_real();
        r.expect("material");
        const std::string tag = r.next();

        Patch patch;
        try {
            patch.geometry.space = TensorSpace2D(SplineSpace1D(KnotVector(ku, p)),
                                                 SplineSpace1D(KnotVector(kvv, q)));
        } catch (const validation_error& err) {
            throw io_error("geometry file: patch " + std::to_string(k) + ": " + err.what());
        }
        r.expect("net");
        const int n = r.next_int();
        const int m = r.next_int();
        if (n != patch.geometry.space.u().num_basis() || m != patch.geometry.space.v().num_basis())
            throw io_error("geometry file: patch " + std::to_string(k) +
                           ": net dims disagree with knots/degree");
        patch.geometry.net.points.resize(static_cast<std::size_t>(n * m));
        for (int idx = 0; idx < n * m; ++idx) {
            const double x = r.next_real();
            const double y = r.next_real();
            r.next_real();  // rational weight column, ignored
            patch.geometry.net.points[static_cast<std::size_t>(idx)] = Vec2(x, y);
        }
        patch.material = tag;
        domain.materials.emplace(tag, MaterialParams{});
        domain.patches.push_back(std::move(patch));
    }
    r.expect("interfaces");
    const int nifaces = r.next_int();
    for (int k = 0; k < nifaces; ++k) {
        InterfaceGlue g;
        g.patch_a = r.next_int();
        g.side_a = side_from_name(r.next());
        g.patch_b = r.next_int();
        g.side_b = side_from_name(r.next());
        const std::string orient = r.next();
        if (orient == "normal")
            g.reversed = false;
        else if (orient == "reversed")
            g.reversed = true;
        else
            throw io_error("geometry file: orientation must be 'normal' or 'reversed', got '" +
                           orient + "'");
        domain.interfaces.push_back(g);
    }
    r.expect("end");
    return domain;
}

void write_geometry_file(const MultipatchDomain& domain, std::ostream& os) {
    char buf[32];
    const auto real = [&buf](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    os << "# thbx geometry v1\n";
    os << "patches " << domain.patches.size() << "\n";
    for (std::size_t k = 0; k < domain.patches.size(); ++k) {
        const Patch& patch = domain.patches[k];
        const TensorSpace2D& sp = patch.geometry.space;
        os << "patch " << k << "\n";
        os << "degree " << sp.u().degree() << ' ' << sp.v().degree() << "\n";
        os << "knots_u " << sp.u().kv().knots().size();
        for (double v : sp.u().kv().knots()) os << ' ' << real(v);
        os << "\nknots_v " << sp.v().kv().knots().size();
        for (double v : sp.v().kv().knots()) os << ' ' << real(v);
        os << "\nmaterial " << patch.material << "\n";
        os << "net " << sp.u().num_basis() << ' ' << sp.v().num_basis() << "\n";
        for (const Vec2& pt : patch.geometry.net.points)
            os << real(pt.x()) << ' ' << real(pt.y()) << " 1\n";
    }
    os << "interfaces " << domain.interfaces.size() << "\n";
    for (const InterfaceGlue& g : domain.interfaces)
        os << g.patch_a << ' ' << side_name(g.side_a) << ' ' << g.patch_b << ' '
           << side_name(g.side_b) << ' ' << (g.reversed ? "reversed" : "normal") << "\n";
    os << "end\n";
}

}  // namespace thbx
