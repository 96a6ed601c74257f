#include "core/exporters.hpp"

#include <array>
#include <cstdio>
#include <ostream>
#include <set>

namespace thbx {

namespace {

std::string fmt(double v, const char* spec = "%.17g") {
    char buf[40];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

}  // namespace

void write_convergence_csv(const std::vector<ConvergenceRecord>& records, std::ostream& os) {
    os << "iter,dofs,elements,l2_error,estimator_total,seconds\n";
    for (const ConvergenceRecord& r : records)
        os << r.iter << ',' << r.dofs << ',' << r.elements << ',' << fmt(r.l2_error) << ','
           << fmt(r.estimator_total) << ',' << fmt(r.seconds) << "\n";
}

void export_fields(const SolutionField& field, int resolution, std::ostream& os) {
    const MultipatchDomain& domain = *field.domain;
    for (int patch = 0; patch < static_cast<int>(domain.patches.size()); ++patch) {
        const std::vector<FieldSample> samples = postprocess_B(field, patch, resolution);
        os << "# vtk DataFile Version 3.0\n";
        os << "thbx fields patch " << patch << "\n";
        os << "ASCII\n";
        os << "DATASET STRUCTURED_GRID\n";
        os << "DIMENSIONS " << resolution << ' ' << resolution << " 1\n";
        os << "POINTS " << samples.size() << " float\n";
        for (const FieldSample& s : samples)
            os << fmt(s.position.x(), "%.9g") << ' ' << fmt(s.position.y(), "%.9g") << " 0\n";
        os << "POINT_DATA " << samples.size() << "\n";
        const auto scalars = [&](const char* name, auto getter) {
            os << "SCALARS " << name << " float 1\n";
            os << "LOOKUP_TABLE default\n";
            for (const FieldSample& s : samples) os << fmt(getter(s), "%.9g") << "\n";
        };
        scalars("Az", [](const FieldSample& s) { return s.az; });
        scalars("Bx", [](const FieldSample& s) { return s.b.x(); });
        scalars("By", [](const FieldSample& s) { return s.b.y(); });
        scalars("Bmag", [](const FieldSample& s) { return s.b.norm(); });
        scalars("level", [](const FieldSample& s) { return static_cast<double>(s.level); });
    }
}

void export_mesh(const MultipatchDomain& domain, std::ostream& os) {
    using Segment = std::array<double, 4>;
    std::set<std::pair<int, Segment>> segments;
    for (const Patch& patch : domain.patches) {
        for (const ElementId& e : patch.space.active_elements()) {
            double u0, u1, v0, v1;
            patch.space.element_box(e, u0, u1, v0, v1);
            const Vec2 c00 = patch.geometry.map(u0, v0);
            const Vec2 c10 = patch.geometry.map(u1, v0);
            const Vec2 c01 = patch.geometry.map(u0, v1);
            const Vec2 c11 = patch.geometry.map(u1, v1);
            const auto add = [&](const Vec2& a, const Vec2& b) {
                Segment s{a.x(), a.y(), b.x(), b.y()};
                if (std::make_pair(b.x(), b.y()) < std::make_pair(a.x(), a.y()))
                    s = {b.x(), b.y(), a.x(), a.y()};
                segments.insert({e.level, s});
            };
            add(c00, c10);
            add(c01, c11);
            add(c00, c01);
            add(c10, c11);
        }
    }
    os << "# thbx mesh edges: level x1 y1 x2 y2\n";
    for (const auto& [level, s] : segments)
        os << level << ' ' << fmt(s[0]) << ' ' << fmt(s[1]) << ' ' << fmt(s[2]) << ' '
           << fmt(s[3]) << "\n";
}

}  // namespace thbx
