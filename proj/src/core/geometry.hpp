#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "core/hierarchy.hpp"
#include "core/spline_space.hpp"

namespace thbx {

/// Material constants; mu_r is dimensionless, br in tesla, jz in A/m^2.
struct MaterialParams {
    double mu_r = 1.0;
    Vec2 br = Vec2::Zero();
    double jz = 0.0;
};

enum class Side : int { West = 0, East = 1, South = 2, North = 3 };

const char* side_name(Side s);
Side side_from_name(const std::string& name);

/// Geometry map of one patch: tensor space plus control net, reference
/// square [0,1]^2 (or the space's own domain) to physical coordinates.
struct PatchGeometry {
    TensorSpace2D space;
    ControlNet net;

    Vec2 map(double xi, double eta, Eigen::Matrix2d* jac = nullptr) const {
        return eval_surface(space, net, xi, eta, jac);
    }
};

/// One patch: geometry map, material tag and the hierarchical solution space.
struct Patch {
    PatchGeometry geometry;
    std::string material;
    HierarchicalSpace space;
};

/// Conforming C0 gluing of two patch sides. `reversed` flips the interface
/// parameter of side b relative to side a.
struct InterfaceGlue {
    int patch_a = 0;
    Side side_a = Side::West;
    int patch_b = 0;
    Side side_b = Side::West;
    bool reversed = false;
};

/// Element of a specific patch's hierarchical mesh.
struct PatchElement {
    int patch = 0;
    ElementId elem;

    friend bool operator==(const PatchElement& a, const PatchElement& b) {
        return a.patch == b.patch && a.elem == b.elem;
    }
    friend bool operator<(const PatchElement& a, const PatchElement& b) {
        if (a.patch != b.patch) return a.patch < b.patch;
        return a.elem < b.elem;
    }
};

/// Multipatch computational domain. Patches own their solution spaces;
/// refinement goes through refine() so interface meshes stay mirrored.
class MultipatchDomain {
public:
    std::vector<Patch> patches;
    std::vector<InterfaceGlue> interfaces;
    std::map<std::string, MaterialParams> materials;

    const MaterialParams& material_of(int patch) const;

    /// True if (patch, side) appears in the interface table.
    bool is_interface_side(int patch, Side s) const;
    /// All (patch, side) pairs on the outer (Dirichlet) boundary.
    std::vector<std::pair<int, Side>> boundary_sides() const;

    /// Checks patch validity, interface conformity (matching degrees,
    /// element counts and coinciding side geometry within 1e-12) and
    /// material table completeness. Throws validation_error on breach.
    void validate() const;

    /// Expands a marked element set so refinement stays conforming: marks of
    /// interface-adjacent elements are mirrored onto the neighbouring patch,
    /// activating coarser ancestors as needed. Returns the closed, sorted set.
    std::vector<PatchElement> close_marks(const std::vector<PatchElement>& marked) const;

    /// Refines the closure of the marked set; returns the updated domain.
    MultipatchDomain refine(const std::vector<PatchElement>& marked) const;

    /// Refines every active element of every patch once.
    MultipatchDomain refine_all() const;

    int num_active_elements() const;
    std::vector<int> active_elements_per_level() const;
    int deepest_active_level() const;
};

/// Builds solution spaces: degree-`degree` uniform tensor spaces with
/// `initial_elements` elements per direction on each patch's parametric
/// domain, wrapped into hierarchies with `max_levels` levels.
void build_solution_spaces(MultipatchDomain& domain, int degree, int initial_elements,
                           int max_levels, bool truncated = true);

/// Geometry file format: see data/horseshoe30.geo for the canonical example.
/// The `w` column of control points is read and ignored.
MultipatchDomain read_geometry_file(const std::string& path);
void write_geometry_file(const MultipatchDomain& domain, std::ostream& os);

/// Single biquadratic-geometry rectangle [x0,x1]x[y0,y1] as a patch.
PatchGeometry make_rectangle_geometry(double x0, double x1, double y0, double y1,
                                      int geo_degree = 1);

}  // namespace thbx
