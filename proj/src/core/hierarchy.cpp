#include "core/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>

#include "core/bernstein.hpp"
#include "core/errors.hpp"

namespace thbx {

namespace {

std::string elem_str(ElementId e) {
    return "(level " + std::to_string(e.level) + ", elem " + std::to_string(e.index) + ")";
}

}  // namespace

HierarchicalSpace::HierarchicalSpace(TensorSpace2D base, int max_levels, bool truncated)
    : truncated_(truncated), caches_(std::make_shared<Caches>()) {
    if (max_levels < 1) throw validation_error("hierarchy: max_levels must be >= 1");
    levels_.reserve(static_cast<std::size_t>(max_levels));
    levels_.push_back({0, base});
    for (int l = 1; l < max_levels; ++l) {
        const TensorSpace2D& prev = levels_.back().space;
        levels_.push_back({l, TensorSpace2D(SplineSpace1D(dyadic_refine(prev.u().kv())),
                                            SplineSpace1D(dyadic_refine(prev.v().kv())))});
    }
    elem_state_.resize(levels_.size());
    for (std::size_t l = 0; l < levels_.size(); ++l)
        elem_state_[l].assign(static_cast<std::size_t>(levels_[l].space.num_elements()),
                              l == 0 ? ElemState::Active : ElemState::Inactive);
    classify_functions();
}

HierarchicalSpace HierarchicalSpace::from_active_elements(
    TensorSpace2D base, int max_levels, const std::vector<std::vector<int>>& active,
    bool truncated) {
    HierarchicalSpace hs(std::move(base), max_levels, truncated);
    if (static_cast<int>(active.size()) > max_levels)
        throw validation_error("from_active_elements: more levels than max_levels");
    for (auto& level_states : hs.elem_state_)
        std::fill(level_states.begin(), level_states.end(), ElemState::Inactive);
    for (std::size_t l = 0; l < active.size(); ++l) {
        const auto& space = hs.levels_[l].space;
        for (int e : active[l]) {
            if (e < 0 || e >= space.num_elements())
                throw validation_error("from_active_elements: element index out of range");
            hs.elem_state_[l][static_cast<std::size_t>(e)] = ElemState::Active;
        }
    }
    // ancestors of active elements must be refined; verify the covering
    for (std::size_t l = 0; l < hs.levels_.size(); ++l) {
        const auto& space = hs.levels_[l].space;
        const int nelu = space.u().num_elements();
        for (int e = 0; e < space.num_elements(); ++e) {
            if (hs.elem_state_[l][static_cast<std::size_t>(e)] != ElemState::Active) continue;
            int ex = e % nelu;
            int ey = e / nelu;
            for (int k = static_cast<int>(l) - 1; k >= 0; --k) {
                ex /= 2;
                ey /= 2;
                const auto& ak = hs.levels_[static_cast<std::size_t>(k)].space;
                auto& st = hs.elem_state_[static_cast<std::size_t>(k)]
                                         [static_cast<std::size_t>(ak.flatten_elem(ex, ey))];
                if (st == ElemState::Active)
                    throw validation_error(
                        "from_active_elements: element overlaps an active ancestor");
                st = ElemState::Refined;
            }
        }
    }
    // every point must be covered exactly once
    for (ElemState st : hs.elem_state_[0])
        if (st == ElemState::Inactive)
            throw validation_error("from_active_elements: level 0 is not fully covered");
    for (std::size_t l = 0; l + 1 < hs.levels_.size(); ++l) {
        const auto& space = hs.levels_[l].space;
        const auto& fine = hs.levels_[l + 1].space;
        const int nelu = space.u().num_elements();
        for (int e = 0; e < space.num_elements(); ++e) {
            const ElemState st = hs.elem_state_[l][static_cast<std::size_t>(e)];
            const int ex = e % nelu;
            const int ey = e / nelu;
            for (int dy = 0; dy < 2; ++dy)
                for (int dx = 0; dx < 2; ++dx) {
                    const int c = fine.flatten_elem(2 * ex + dx, 2 * ey + dy);
                    const ElemState cst = hs.elem_state_[l + 1][static_cast<std::size_t>(c)];
                    if (st == ElemState::Refined && cst == ElemState::Inactive)
                        throw validation_error("from_active_elements: refined element " +
                                               elem_str({static_cast<int>(l), e}) +
                                               " has uncovered children");
                    if (st != ElemState::Refined && cst != ElemState::Inactive)
                        throw validation_error("from_active_elements: child of non-refined " +
                                               elem_str({static_cast<int>(l), e}) +
                                               " is activated");
                }
        }
    }
    hs.classify_functions();
    hs.caches_ = std::make_shared<Caches>();
    return hs;
}

int HierarchicalSpace::deepest_active_level() const {
    int deepest = 0;
    for (int l = max_levels() - 1; l >= 0; --l) {
        const auto& states = elem_state_[static_cast<std::size_t>(l)];
        if (std::any_of(states.begin(), states.end(),
                        [](ElemState s) { return s == ElemState::Active; })) {
            deepest = l;
            break;
        }
    }
    return deepest;
}

std::vector<ElementId> HierarchicalSpace::active_elements() const {
    std::vector<ElementId> out;
    for (int l = 0; l < max_levels(); ++l) {
        const auto& states = elem_state_[static_cast<std::size_t>(l)];
        for (int e = 0; e < static_cast<int>(states.size()); ++e)
            if (states[static_cast<std::size_t>(e)] == ElemState::Active) out.push_back({l, e});
    }
    return out;
}

int HierarchicalSpace::num_active_elements() const {
    int count = 0;
    for (const auto& states : elem_state_)
        count += static_cast<int>(std::count(states.begin(), states.end(), ElemState::Active));
    return count;
}

std::vector<int> HierarchicalSpace::active_elements_per_level() const {
    std::vector<int> out;
    for (const auto& states : elem_state_)
        out.push_back(static_cast<int>(std::count(states.begin(), states.end(), ElemState::Active)));
    return out;
}

int HierarchicalSpace::num_active_functions() const { return level_offset_.back(); }

int HierarchicalSpace::global_function_index(FunctionId f) const {
    const auto& funcs = active_funcs_[static_cast<std::size_t>(f.level)];
    const auto it = std::lower_bound(funcs.begin(), funcs.end(), f.index);
    if (it == funcs.end() || *it != f.index)
        throw internal_error("global_function_index: function is not active");
    return level_offset_[static_cast<std::size_t>(f.level)] +
           static_cast<int>(it - funcs.begin());
}

FunctionId HierarchicalSpace::function_at(int global_index) const {
    for (int l = 0; l < max_levels(); ++l) {
        const int begin = level_offset_[static_cast<std::size_t>(l)];
        const int end = level_offset_[static_cast<std::size_t>(l) + 1];
        if (global_index >= begin && global_index < end)
            return {l, active_funcs_[static_cast<std::size_t>(l)]
                                    [static_cast<std::size_t>(global_index - begin)]};
    }
    throw internal_error("function_at: global index out of range");
}

void HierarchicalSpace::classify_functions() {
    const std::size_t L = levels_.size();
    active_funcs_.assign(L, {});
    deactivated_funcs_.assign(L, {});
    active_mask_.assign(L, {});
    for (std::size_t l = 0; l < L; ++l) {
        const TensorSpace2D& space = levels_[l].space;
        active_mask_[l].assign(static_cast<std::size_t>(space.num_basis()), 0);
        const auto& states = elem_state_[l];
        const bool any_covered = std::any_of(states.begin(), states.end(), [](ElemState s) {
            return s != ElemState::Inactive;
        });
        if (!any_covered) continue;

        const int nu = space.u().num_basis();
        const int nv = space.v().num_basis();
        const int nelu = space.u().num_elements();
        std::vector<std::pair<int, int>> u_range(static_cast<std::size_t>(nu));
        for (int i = 0; i < nu; ++i) u_range[static_cast<std::size_t>(i)] = space.u().element_range_of_basis(i);
        for (int j = 0; j < nv; ++j) {
            const auto [v_lo, v_hi] = space.v().element_range_of_basis(j);
            for (int i = 0; i < nu; ++i) {
                const auto [u_lo, u_hi] = u_range[static_cast<std::size_t>(i)];
                bool has_active = false;
                bool all_covered = true;
                bool all_refined = true;
                for (int ey = v_lo; ey <= v_hi && all_covered; ++ey)
                    for (int ex = u_lo; ex <= u_hi; ++ex) {
                        const ElemState s =
                            states[static_cast<std::size_t>(ey * nelu + ex)];
                        if (s == ElemState::Active) has_active = true;
                        if (s != ElemState::Refined) all_refined = false;
                        if (s == ElemState::Inactive) {
                            all_covered = false;
                            break;
                        }
                    }
                const int flat = space.flatten(i, j);
                if (all_covered && has_active) {
                    active_funcs_[l].push_back(flat);
                    active_mask_[l][static_cast<std::size_t>(flat)] = 1;
                } else if (all_covered && all_refined) {
                    deactivated_funcs_[l].push_back(flat);
                }
            }
        }
        std::sort(active_funcs_[l].begin(), active_funcs_[l].end());
        std::sort(deactivated_funcs_[l].begin(), deactivated_funcs_[l].end());
    }
    level_offset_.assign(L + 1, 0);
    for (std::size_t l = 0; l < L; ++l)
        level_offset_[l + 1] = level_offset_[l] + static_cast<int>(active_funcs_[l].size());
}

HierarchicalSpace HierarchicalSpace::refine_elements(const std::vector<ElementId>& marked) const {
    HierarchicalSpace out = *this;
    out.caches_ = std::make_shared<Caches>();

    std::vector<ElementId> sorted = marked;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

    for (const ElementId& m : sorted) {
        if (m.level < 0 || m.level >= max_levels() || m.index < 0 ||
            m.index >= levels_[static_cast<std::size_t>(m.level)].space.num_elements())
            throw validation_error("refine_elements: element id " + elem_str(m) +
                                   " out of range");
        if (out.elem_state_[static_cast<std::size_t>(m.level)]
                           [static_cast<std::size_t>(m.index)] != ElemState::Active)
            throw validation_error("refine_elements: element " + elem_str(m) +
                                   " is not active");
        if (m.level + 1 >= max_levels())
            throw validation_error("refine_elements: refining " + elem_str(m) +
                                   " would exceed max_levels");
        const TensorSpace2D& space = levels_[static_cast<std::size_t>(m.level)].space;
        const TensorSpace2D& fine = levels_[static_cast<std::size_t>(m.level) + 1].space;
        const auto [ex, ey] = space.unflatten_elem(m.index);
        out.elem_state_[static_cast<std::size_t>(m.level)][static_cast<std::size_t>(m.index)] =
            ElemState::Refined;
        for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
                const int child = fine.flatten_elem(2 * ex + dx, 2 * ey + dy);
                auto& st = out.elem_state_[static_cast<std::size_t>(m.level) + 1]
                                          [static_cast<std::size_t>(child)];
                if (st != ElemState::Inactive)
                    throw internal_error("refine_elements: child already covered");
                st = ElemState::Active;
            }
    }
    out.classify_functions();
    return out;
}

const ExtractionOperator& HierarchicalSpace::subdivision_u(int level) const {
    auto& cache = caches_->subdiv_u;
    if (cache.size() < levels_.size()) cache.resize(levels_.size());
    auto& slot = cache[static_cast<std::size_t>(level)];
    if (!slot) slot = thbx::subdivision_matrix(levels_[static_cast<std::size_t>(level)].space.u());
    return *slot;
}

const ExtractionOperator& HierarchicalSpace::subdivision_v(int level) const {
    auto& cache = caches_->subdiv_v;
    if (cache.size() < levels_.size()) cache.resize(levels_.size());
    auto& slot = cache[static_cast<std::size_t>(level)];
    if (!slot) slot = thbx::subdivision_matrix(levels_[static_cast<std::size_t>(level)].space.v());
    return *slot;
}

Eigen::VectorXd HierarchicalSpace::truncate_coefficients(int level,
                                                         const Eigen::VectorXd& fine_coeffs) const {
    if (level < 0 || level + 1 >= max_levels())
        throw validation_error("truncate_coefficients: level out of range");
    const TensorSpace2D& fine = levels_[static_cast<std::size_t>(level) + 1].space;
    if (fine_coeffs.size() != fine.num_basis())
        throw validation_error("truncate_coefficients: coefficient vector has wrong size");
    Eigen::VectorXd out = fine_coeffs;
    const auto& mask = active_mask_[static_cast<std::size_t>(level) + 1];
    for (int k = 0; k < out.size(); ++k)
        if (mask[static_cast<std::size_t>(k)]) out[k] = 0.0;
    return out;
}

SparseRow HierarchicalSpace::expand_row(FunctionId f, int target_level) const {
    // expand the unit coefficient of f down to target_level, truncating
    // against active functions after each subdivision step
    std::vector<std::pair<int, double>> cur = {{f.index, 1.0}};
    int nu_cur = levels_[static_cast<std::size_t>(f.level)].space.u().num_basis();
    for (int k = f.level; k < target_level; ++k) {
        const ExtractionOperator& su = subdivision_u(k);
        const ExtractionOperator& sv = subdivision_v(k);
        const int nu_next = static_cast<int>(su.mat.cols());
        std::vector<std::pair<int, double>> next;
        next.reserve(cur.size() * 9);
        for (const auto& [idx, w] : cur) {
            const int ci = idx % nu_cur;
            const int cj = idx / nu_cur;
            for (int fj = 0; fj < static_cast<int>(sv.mat.cols()); ++fj) {
                const double wv = sv.mat(cj, fj);
                if (wv == 0.0) continue;
                for (int fi = 0; fi < nu_next; ++fi) {
                    const double wu = su.mat(ci, fi);
                    if (wu != 0.0) next.emplace_back(fj * nu_next + fi, w * wv * wu);
                }
            }
        }
        std::sort(next.begin(), next.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        const auto& mask = active_mask_[static_cast<std::size_t>(k) + 1];
        std::vector<std::pair<int, double>> merged;
        merged.reserve(next.size());
        for (const auto& [idx, w] : next) {
            if (truncated_ && mask[static_cast<std::size_t>(idx)]) continue;
            if (!merged.empty() && merged.back().first == idx)
                merged.back().second += w;
            else
                merged.emplace_back(idx, w);
        }
        cur = std::move(merged);
        nu_cur = nu_next;
    }
    SparseRow row;
    row.cols.reserve(cur.size());
    row.vals.reserve(cur.size());
    for (const auto& [idx, w] : cur) {
        row.cols.push_back(idx);
        row.vals.push_back(w);
    }
    return row;
}

const SparseRow& HierarchicalSpace::multilevel_row(FunctionId f, int target_level) const {
    if (target_level < f.level || target_level >= max_levels())
        throw validation_error("multilevel_row: level out of range");
    auto& cache = caches_->rows;
    const auto key = std::make_pair(target_level, f);
    const auto hit = cache.find(key);
    if (hit != cache.end()) return hit->second;
    return cache.emplace(key, expand_row(f, target_level)).first->second;
}

const MultilevelOperator& HierarchicalSpace::global_multilevel_operator(int target_level) const {
    if (target_level < 0 || target_level >= max_levels())
        throw validation_error("global_multilevel_operator: level out of range");
    auto& cache = caches_->mlop;
    if (cache.size() < levels_.size()) cache.resize(levels_.size());
    auto& slot = cache[static_cast<std::size_t>(target_level)];
    if (slot) return *slot;

    MultilevelOperator op;
    op.target_level = target_level;
    op.num_cols = levels_[static_cast<std::size_t>(target_level)].space.num_basis();
    for (int l = 0; l <= target_level; ++l)
        for (int flat : active_funcs_[static_cast<std::size_t>(l)]) {
            op.row_functions.push_back({l, flat});
            op.rows.push_back(expand_row({l, flat}, target_level));
        }
    slot = std::move(op);
    return *slot;
}

std::vector<FunctionId> HierarchicalSpace::functions_on_element(ElementId e) const {
    if (element_state(e.level, e.index) != ElemState::Active)
        throw validation_error("functions_on_element: element " + elem_str(e) + " is not active");
    std::vector<FunctionId> out;
    const TensorSpace2D& espace = levels_[static_cast<std::size_t>(e.level)].space;
    auto [ex, ey] = espace.unflatten_elem(e.index);
    for (int l = e.level; l >= 0; --l) {
        const TensorSpace2D& lspace = levels_[static_cast<std::size_t>(l)].space;
        const int ax = ex >> (e.level - l);
        const int ay = ey >> (e.level - l);
        const int first_u = lspace.u().first_basis_on_element(ax);
        const int first_v = lspace.v().first_basis_on_element(ay);
        for (int j = 0; j <= lspace.v().degree(); ++j)
            for (int i = 0; i <= lspace.u().degree(); ++i) {
                const int flat = lspace.flatten(first_u + i, first_v + j);
                if (is_active_function(l, flat)) out.push_back({l, flat});
            }
    }
    std::sort(out.begin(), out.end());
    return out;
}

const ExtractionOperator& HierarchicalSpace::local_extraction(ElementId e) const {
    auto& cache = caches_->local;
    const auto hit = cache.find(e);
    if (hit != cache.end()) return hit->second;

    if (element_state(e.level, e.index) != ElemState::Active)
        throw validation_error("local_extraction: element " + elem_str(e) + " is not active");

    const TensorSpace2D& space = levels_[static_cast<std::size_t>(e.level)].space;
    const int p = space.u().degree();
    const int q = space.v().degree();
    const auto [ex, ey] = space.unflatten_elem(e.index);
    const int first_u = space.u().first_basis_on_element(ex);
    const int first_v = space.v().first_basis_on_element(ey);

    const std::vector<FunctionId> funcs = functions_on_element(e);

    // M^loc: rows = supported active functions, cols = level-l functions on e
    const int nloc = (p + 1) * (q + 1);
    Eigen::MatrixXd Mloc = Eigen::MatrixXd::Zero(static_cast<int>(funcs.size()), nloc);
    for (std::size_t r = 0; r < funcs.size(); ++r) {
        const SparseRow& srow = multilevel_row(funcs[r], e.level);
        for (int j = 0; j <= q; ++j)
            for (int i = 0; i <= p; ++i) {
                const int col = space.flatten(first_u + i, first_v + j);
                const auto it = std::lower_bound(srow.cols.begin(), srow.cols.end(), col);
                if (it != srow.cols.end() && *it == col)
                    Mloc(static_cast<int>(r), j * (p + 1) + i) =
                        srow.vals[static_cast<std::size_t>(it - srow.cols.begin())];
            }
    }

    // E^loc: tensor-product Bezier extraction of the element at its level
    auto& bu = caches_->bezier_u;
    auto& bv = caches_->bezier_v;
    if (bu.size() < levels_.size()) bu.resize(levels_.size());
    if (bv.size() < levels_.size()) bv.resize(levels_.size());
    auto& bu_slot = bu[static_cast<std::size_t>(e.level)];
    auto& bv_slot = bv[static_cast<std::size_t>(e.level)];
    if (!bu_slot) bu_slot = bezier_extraction(space.u());
    if (!bv_slot) bv_slot = bezier_extraction(space.v());
    const Eigen::MatrixXd& Eu = (*bu_slot)[static_cast<std::size_t>(ex)];
    const Eigen::MatrixXd& Ev = (*bv_slot)[static_cast<std::size_t>(ey)];
    Eigen::MatrixXd Eloc(nloc, nloc);
    for (int j = 0; j <= q; ++j)
        for (int i = 0; i <= p; ++i)
            for (int bj = 0; bj <= q; ++bj)
                for (int bi = 0; bi <= p; ++bi)
                    Eloc(j * (p + 1) + i, bj * (p + 1) + bi) = Eu(i, bi) * Ev(j, bj);

    ExtractionOperator C;
    C.mat = Mloc * Eloc;
    C.row_index.reserve(funcs.size());
    for (const FunctionId& f : funcs) C.row_index.push_back(global_function_index(f));
    auto [it, inserted] = cache.emplace(e, std::move(C));
    (void)inserted;
    return it->second;
}

ElementId HierarchicalSpace::element_at(double xi, double eta) const {
    const TensorSpace2D& base = levels_[0].space;
    int ex = base.u().element_of(xi);
    int ey = base.v().element_of(eta);
    int level = 0;
    while (true) {
        const TensorSpace2D& space = levels_[static_cast<std::size_t>(level)].space;
        const int flat = space.flatten_elem(ex, ey);
        const ElemState st = element_state(level, flat);
        if (st == ElemState::Active) return {level, flat};
        if (st == ElemState::Inactive)
            throw internal_error("element_at: walked into an uncovered element");
        const auto [u0, u1] = space.u().element_interval(ex);
        const auto [v0, v1] = space.v().element_interval(ey);
        ex = 2 * ex + (xi < 0.5 * (u0 + u1) ? 0 : 1);
        ey = 2 * ey + (eta < 0.5 * (v0 + v1) ? 0 : 1);
        ++level;
    }
}

void HierarchicalSpace::element_box(ElementId e, double& u0, double& u1, double& v0,
                                    double& v1) const {
    const TensorSpace2D& space = levels_[static_cast<std::size_t>(e.level)].space;
    const auto [ex, ey] = space.unflatten_elem(e.index);
    std::tie(u0, u1) = space.u().element_interval(ex);
    std::tie(v0, v1) = space.v().element_interval(ey);
}

HierEvalResult HierarchicalSpace::eval(double xi, double eta) const {
    const ElementId e = element_at(xi, eta);
    const ExtractionOperator& C = local_extraction(e);
    const TensorSpace2D& space = levels_[static_cast<std::size_t>(e.level)].space;
    const int p = space.u().degree();
    const int q = space.v().degree();

    double u0, u1, v0, v1;
    element_box(e, u0, u1, v0, v1);
    const double hu = u1 - u0;
    const double hv = v1 - v0;
    const double ul = (xi - u0) / hu;
    const double vl = (eta - v0) / hv;

    const Eigen::MatrixXd bu = bernstein_derivs(p, ul, 1);
    const Eigen::MatrixXd bv = bernstein_derivs(q, vl, 1);

    const int nloc = (p + 1) * (q + 1);
    Eigen::VectorXd B(nloc), Bu(nloc), Bv(nloc);
    for (int j = 0; j <= q; ++j)
        for (int i = 0; i <= p; ++i) {
            const int k = j * (p + 1) + i;
            B[k] = bu(0, i) * bv(0, j);
            Bu[k] = bu(1, i) * bv(0, j) / hu;
            Bv[k] = bu(0, i) * bv(1, j) / hv;
        }

    HierEvalResult res;
    res.element = e;
    res.functions = functions_on_element(e);
    res.values = C.mat * B;
    res.grad_u = C.mat * Bu;
    res.grad_v = C.mat * Bv;
    return res;
}

void HierarchicalSpace::dump_extraction(std::ostream& os) const {
    os << "hierarchical_space levels " << max_levels() << " truncated " << (truncated_ ? 1 : 0)
       << "\n";
    for (int l = 0; l < max_levels(); ++l) {
        os << "level " << l << " active_functions";
        for (int f : active_functions(l)) os << ' ' << f;
        os << "\n";
        os << "level " << l << " deactivated_functions";
        for (int f : deactivated_functions(l)) os << ' ' << f;
        os << "\n";
    }
    char buf[32];
    for (const ElementId& e : active_elements()) {
        const ExtractionOperator& C = local_extraction(e);
        os << "element " << e.level << ' ' << e.index << " rows";
        for (int r : C.row_index) os << ' ' << r;
        os << "\n";
        for (int r = 0; r < C.rows(); ++r) {
            for (int c = 0; c < C.cols(); ++c) {
                std::snprintf(buf, sizeof buf, "%.17g", C.mat(r, c));
                os << (c ? " " : "") << buf;
            }
            os << "\n";
        }
    }
}

double active_covered_area(const HierarchicalSpace& hs) {
    double area = 0.0;
    for (const ElementId& e : hs.active_elements()) {
        double u0, u1, v0, v1;
        hs.element_box(e, u0, u1, v0, v1);
        area += (u1 - u0) * (v1 - v0);
    }
    return area;
}

}  // namespace thbx
