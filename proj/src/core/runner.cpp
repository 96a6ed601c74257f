#include "core/runner.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "core/errors.hpp"
#include "core/exporters.hpp"

namespace fs = std::filesystem;

namespace thbx {

namespace {

PatchGeometry unit_square_geometry() { return make_rectangle_geometry(0.0, 1.0, 0.0, 1.0); }

void apply_material_overrides(MultipatchDomain& domain, const RunConfig& cfg) {
    for (const auto& [tag, ov] : cfg.material_overrides) {
        const auto it = domain.materials.find(tag);
        if (it == domain.materials.end())
            throw validation_error("config field 'materials." + tag +
                                   "': tag does not appear in the geometry");
        if (ov.mu_r) it->second.mu_r = *ov.mu_r;
        if (ov.br) it->second.br = *ov.br;
        if (ov.jz) it->second.jz = *ov.jz;
    }
}

std::string resolve_geometry_path(const RunConfig& cfg, const std::string& base_dir) {
    fs::path p(cfg.geometry_path);
    if (p.is_relative() && !base_dir.empty()) p = fs::path(base_dir) / p;
    return p.string();
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot open '" + path.string() + "' for writing");
    os << text;
    if (!os) throw io_error("failed writing '" + path.string() + "'");
}

void save_state(const fs::path& path, const MultipatchDomain& domain,
                const Eigen::VectorXd& coeffs) {
    std::ostringstream os;
    os << "thbx_state v1\n";
    os << "patches " << domain.patches.size() << "\n";
    for (std::size_t p = 0; p < domain.patches.size(); ++p) {
        const HierarchicalSpace& hs = domain.patches[p].space;
        os << "patch " << p << " levels " << hs.max_levels() << "\n";
        for (int l = 0; l < hs.max_levels(); ++l) {
            std::vector<int> active;
            for (int e = 0; e < hs.level_space(l).num_elements(); ++e)
                if (hs.element_state(l, e) == ElemState::Active) active.push_back(e);
            os << "level " << l << " active " << active.size();
            for (int e : active) os << ' ' << e;
            os << "\n";
        }
    }
    char buf[32];
    os << "coeffs " << coeffs.size() << "\n";
    for (int i = 0; i < coeffs.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", coeffs[i]);
        os << buf << "\n";
    }
    write_text_file(path, os.str());
}

void load_state(const fs::path& path, MultipatchDomain& domain, Eigen::VectorXd& coeffs) {
    std::ifstream is(path);
    if (!is) throw io_error("cannot open state file '" + path.string() + "'");
    std::string tok;
    is >> tok;
    if (tok != "thbx_state") throw io_error("state file: bad magic");
    is >> tok;  // version
    std::size_t npatches;
    is >> tok >> npatches;
    if (tok != "patches" || npatches != domain.patches.size())
        throw io_error("state file: patch count mismatch");
    for (std::size_t p = 0; p < npatches; ++p) {
        std::size_t idx;
        int levels;
        is >> tok >> idx >> tok >> levels;
        std::vector<std::vector<int>> active(static_cast<std::size_t>(levels));
        for (int l = 0; l < levels; ++l) {
            int lvl;
            std::size_t count;
            is >> tok >> lvl >> tok >> count;
            active[static_cast<std::size_t>(l)].resize(count);
            for (std::size_t k = 0; k < count; ++k) is >> active[static_cast<std::size_t>(l)][k];
        }
        const HierarchicalSpace& hs = domain.patches[p].space;
        domain.patches[p].space = HierarchicalSpace::from_active_elements(
            hs.level_space(0), levels, active, hs.truncated());
    }
    long n;
    is >> tok >> n;
    if (tok != "coeffs") throw io_error("state file: missing coefficient block");
    coeffs.resize(n);
    for (long i = 0; i < n; ++i) is >> coeffs[i];
    if (!is) throw io_error("state file: truncated");
}

}  // namespace

MultipatchDomain build_domain(const RunConfig& cfg, const std::string& base_dir) {
    MultipatchDomain domain;
    if (cfg.problem == "poisson_peak") {
        Patch patch;
        patch.geometry = unit_square_geometry();
        patch.material = "air";
        domain.patches.push_back(std::move(patch));
        domain.materials["air"] = MaterialParams{};
    } else {
        domain = horseshoe_domain(resolve_geometry_path(cfg, base_dir));
    }
    apply_material_overrides(domain, cfg);
    build_solution_spaces(domain, cfg.degree, cfg.initial_elements, cfg.adaptivity.max_levels,
                          cfg.truncated);
    domain.validate();
    return domain;
}

PhysicsProblem build_problem(const RunConfig& cfg) {
    return cfg.problem == "poisson_peak" ? poisson_peak_problem() : magnetostatic_problem();
}

RunSummary run_from_config(const RunConfig& cfg, const std::string& base_dir) {
    validate_config(cfg, base_dir);
    MultipatchDomain domain = build_domain(cfg, base_dir);
    const PhysicsProblem problem = build_problem(cfg);

    fs::path out_dir(cfg.out_dir);
    if (out_dir.is_relative() && !base_dir.empty()) out_dir = fs::path(base_dir) / out_dir;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw io_error("cannot create run directory '" + out_dir.string() + "'");

    RunConfig resolved = cfg;
    if (cfg.problem != "poisson_peak") {
        // self-contained run directory: embed the geometry
        const std::string src = resolve_geometry_path(cfg, base_dir);
        std::ifstream gin(src, std::ios::binary);
        std::ostringstream gbuf;
        gbuf << gin.rdbuf();
        write_text_file(out_dir / "geometry.geo", gbuf.str());
        resolved.geometry_path = "geometry.geo";
    }
    write_text_file(out_dir / "config.txt", config_to_text(resolved));

    AdaptiveConfig acfg = cfg.adaptivity;
    acfg.marking = marking_mode_of(cfg);
    acfg.record_timing = cfg.record_timing;

    const IterationObserver observer = [&](int iter, const MultipatchDomain& d, const DofMap&,
                                           const Eigen::VectorXd&) {
        if (!cfg.write_mesh) return;
        char name[32];
        std::snprintf(name, sizeof name, "mesh_%03d.txt", iter);
        std::ofstream os(out_dir / name, std::ios::binary);
        export_mesh(d, os);
    };

    AdaptiveResult result =
        cfg.marking == "uniform"
            ? uniform_refinement_loop(domain, problem, cfg.adaptivity.max_iterations, acfg,
                                      observer)
            : adaptive_loop(domain, problem, acfg, observer);

    {
        std::ofstream os(out_dir / "convergence.csv", std::ios::binary);
        write_convergence_csv(result.records, os);
        if (!os) throw io_error("failed writing convergence.csv");
    }
    save_state(out_dir / "solution.txt", result.domain, result.solution);
    if (cfg.write_fields) {
        SolutionField field{&result.domain, &result.dofmap, result.solution};
        std::ofstream os(out_dir / "fields.vtk", std::ios::binary);
        export_fields(field, cfg.fields_resolution, os);
        if (!os) throw io_error("failed writing fields.vtk");
    }

    std::cout << "run: " << cfg.problem << " (" << cfg.marking << " marking)\n";
    std::cout << "  iter      dofs  elements       l2_error      estimator\n";
    for (const ConvergenceRecord& r : result.records) {
        char line[128];
        std::snprintf(line, sizeof line, "  %4d %9d %9d %14.6e %14.6e\n", r.iter, r.dofs,
                      r.elements, r.l2_error, r.estimator_total);
        std::cout << line;
    }
    std::cout << "outputs in " << out_dir.string() << "\n";

    RunSummary summary;
    summary.run_dir = out_dir.string();
    summary.records = std::move(result.records);
    return summary;
}

void export_from_run_dir(const std::string& run_dir, const std::string& what) {
    const fs::path dir(run_dir);
    if (!fs::exists(dir / "config.txt"))
        throw io_error("run directory '" + run_dir + "' has no config.txt");
    const RunConfig cfg = parse_config_file((dir / "config.txt").string());
    MultipatchDomain domain = build_domain(cfg, dir.string());
    Eigen::VectorXd coeffs;
    load_state(dir / "solution.txt", domain, coeffs);

    if (what == "mesh") {
        std::ofstream os(dir / "mesh_export.txt", std::ios::binary);
        export_mesh(domain, os);
        if (!os) throw io_error("failed writing mesh_export.txt");
    } else if (what == "fields") {
        const DofMap dofmap = build_dof_map(domain);
        if (coeffs.size() != dofmap.num_global)
            throw io_error("state file: coefficient count does not match the mesh");
        SolutionField field{&domain, &dofmap, coeffs};
        std::ofstream os(dir / "fields.vtk", std::ios::binary);
        export_fields(field, cfg.fields_resolution, os);
        if (!os) throw io_error("failed writing fields.vtk");
    } else {
        throw validation_error("export: unknown kind '" + what + "' (expected fields or mesh)");
    }
}

}  // namespace thbx
