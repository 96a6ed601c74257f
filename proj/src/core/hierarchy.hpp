#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "core/extraction.hpp"
#include "core/spline_space.hpp"

namespace thbx {

/// State of one tensor element within its level.
enum class ElemState : std::uint8_t {
    Inactive = 0,  ///< covered by a coarser active element
    Active = 1,    ///< part of the current mesh
    Refined = 2,   ///< replaced by its four children
};

/// (level, flattened tensor element index) pair identifying a mesh element.
struct ElementId {
    int level = 0;
    int index = 0;

    friend bool operator==(const ElementId& a, const ElementId& b) {
        return a.level == b.level && a.index == b.index;
    }
    friend bool operator<(const ElementId& a, const ElementId& b) {
        return a.level != b.level ? a.level < b.level : a.index < b.index;
    }
};

/// (level, flattened tensor function index) pair identifying a basis function.
struct FunctionId {
    int level = 0;
    int index = 0;

    friend bool operator==(const FunctionId& a, const FunctionId& b) {
        return a.level == b.level && a.index == b.index;
    }
    friend bool operator<(const FunctionId& a, const FunctionId& b) {
        return a.level != b.level ? a.level < b.level : a.index < b.index;
    }
};

/// Sparse row with sorted column indices; used for the rows of the global
/// multi-level operator.
struct SparseRow {
    std::vector<int> cols;
    std::vector<double> vals;
};

/// Global multi-level extraction operator M: one row per active function
/// (levels 0..L in (level, index) order), columns indexing the level-L
/// tensor basis.
struct MultilevelOperator {
    int target_level = 0;
    int num_cols = 0;
    std::vector<FunctionId> row_functions;
    std::vector<SparseRow> rows;
};

/// Result of evaluating all hierarchical functions supported on the active
/// element containing a parametric point.
struct HierEvalResult {
    ElementId element;
    std::vector<FunctionId> functions;
    Eigen::VectorXd values;
    Eigen::VectorXd grad_u;  ///< d/dxi, parametric
    Eigen::VectorXd grad_v;  ///< d/deta, parametric
};

/// One dyadically refined tensor level.
struct LevelSpace {
    int level = 0;
    TensorSpace2D space;
};

/// Hierarchical (optionally truncated) spline space over nested dyadic
/// levels of a 2D tensor-product base space. Immutable between refinement
/// steps: refine_elements returns an updated copy.
class HierarchicalSpace {
public:
    HierarchicalSpace() = default;

    /// Level 0 fully active, deeper levels empty.
    HierarchicalSpace(TensorSpace2D base, int max_levels, bool truncated = true);

    /// Rebuild a space from explicit active element sets (level 0 upward).
    /// Ancestors of active elements become refined; consistency is checked.
    static HierarchicalSpace from_active_elements(TensorSpace2D base, int max_levels,
                                                  const std::vector<std::vector<int>>& active,
                                                  bool truncated = true);

    int max_levels() const { return static_cast<int>(levels_.size()); }
    bool truncated() const { return truncated_; }
    const TensorSpace2D& level_space(int l) const { return levels_[static_cast<std::size_t>(l)].space; }

    /// Deepest level holding any active element.
    int deepest_active_level() const;

    ElemState element_state(int level, int elem) const {
        return elem_state_[static_cast<std::size_t>(level)][static_cast<std::size_t>(elem)];
    }
    /// All active elements in (level, index) order.
    std::vector<ElementId> active_elements() const;
    int num_active_elements() const;
    std::vector<int> active_elements_per_level() const;

    const std::vector<int>& active_functions(int level) const {
        return active_funcs_[static_cast<std::size_t>(level)];
    }
    const std::vector<int>& deactivated_functions(int level) const {
        return deactivated_funcs_[static_cast<std::size_t>(level)];
    }
    bool is_active_function(int level, int flat) const {
        return active_mask_[static_cast<std::size_t>(level)][static_cast<std::size_t>(flat)] != 0;
    }
    /// Total number of active functions over all levels (the DOF count of
    /// the space before any multipatch merging).
    int num_active_functions() const;
    /// Position of an active function in the global (level, index) ordering.
    int global_function_index(FunctionId f) const;
    FunctionId function_at(int global_index) const;

    /// Deactivates the marked active elements, activates their children and
    /// reclassifies the function sets. Marked elements must be active and
    /// must not sit on the deepest allowed level.
    HierarchicalSpace refine_elements(const std::vector<ElementId>& marked) const;

    /// Truncation step of the THB construction: zero every coefficient of a
    /// coefficient vector (over the level l+1 tensor basis) that belongs to
    /// an active level l+1 function.
    Eigen::VectorXd truncate_coefficients(int level, const Eigen::VectorXd& fine_coeffs) const;

    /// Global multi-level operator for target level L (cached).
    const MultilevelOperator& global_multilevel_operator(int target_level) const;

    /// Single row of the multi-level operator: the (truncated) level-L
    /// coefficients of one active function. Cached per (function, level);
    /// local extraction uses these so deep meshes never materialize rows
    /// of functions that are not supported on any deep element.
    const SparseRow& multilevel_row(FunctionId f, int target_level) const;

    /// Supported active functions on an active element, (level, index) sorted.
    std::vector<FunctionId> functions_on_element(ElementId e) const;

    /// Element-local multi-level Bezier operator C^e = M^loc E^loc; rows
    /// follow functions_on_element(e), columns index the tensor-product
    /// Bernstein basis (u-fastest). Cached per element.
    const ExtractionOperator& local_extraction(ElementId e) const;

    /// Active element containing the parametric point (right/top edges
    /// resolve to the last element).
    ElementId element_at(double xi, double eta) const;

    /// Parametric bounding box [u0,u1]x[v0,v1] of an element of its level.
    void element_box(ElementId e, double& u0, double& u1, double& v0, double& v1) const;

    /// Values and parametric gradients of all supported active functions at
    /// a point, computed as C^e B.
    HierEvalResult eval(double xi, double eta) const;

    /// Structured text dump of active sets and per-element extraction
    /// operators, for golden-file comparisons.
    void dump_extraction(std::ostream& os) const;

    /// Univariate subdivision operators of level l (towards l+1).
    const ExtractionOperator& subdivision_u(int level) const;
    const ExtractionOperator& subdivision_v(int level) const;

private:
    void classify_functions();
    void ensure_level_built(int level) const;

    std::vector<LevelSpace> levels_;
    bool truncated_ = true;

    std::vector<std::vector<ElemState>> elem_state_;
    std::vector<std::vector<int>> active_funcs_;       // sorted flat indices
    std::vector<std::vector<int>> deactivated_funcs_;  // sorted flat indices
    std::vector<std::vector<std::uint8_t>> active_mask_;
    std::vector<int> level_offset_;  // prefix sums of active counts

    struct Caches {
        std::vector<std::optional<ExtractionOperator>> subdiv_u;
        std::vector<std::optional<ExtractionOperator>> subdiv_v;
        std::vector<std::optional<MultilevelOperator>> mlop;
        std::map<std::pair<int, FunctionId>, SparseRow> rows;
        std::vector<std::optional<std::vector<Eigen::MatrixXd>>> bezier_u;
        std::vector<std::optional<std::vector<Eigen::MatrixXd>>> bezier_v;
        std::map<ElementId, ExtractionOperator> local;
    };
    mutable std::shared_ptr<Caches> caches_;

    SparseRow expand_row(FunctionId f, int target_level) const;
};

/// Parametric area covered by the active elements (covering invariant:
/// equals the base domain area).
double active_covered_area(const HierarchicalSpace& hs);

}  // namespace thbx
