#pragma once

#include <iosfwd>
#include <vector>

#include "core/adaptivity.hpp"
#include "core/physics.hpp"

namespace thbx {

/// `iter,dofs,elements,l2_error,estimator_total,seconds`, one row per
/// iteration, reals at 17 significant digits.
void write_convergence_csv(const std::vector<ConvergenceRecord>& records, std::ostream& os);

/// Legacy-VTK-style ASCII structured grid per patch (point arrays Az, Bx,
/// By, Bmag, level), blocks concatenated; reals at 9 significant digits.
void export_fields(const SolutionField& field, int resolution, std::ostream& os);

/// Active-element edges as physical line segments tagged with their level,
/// deduplicated and sorted; one `level x1 y1 x2 y2` line each.
void export_mesh(const MultipatchDomain& domain, std::ostream& os);

}  // namespace thbx
