#pragma once

#include <string>

#include "core/config.hpp"

namespace thbx {

/// Builds the computational domain for a configuration: the unit square for
/// the Poisson benchmark, the geometry file for the multipatch problems.
/// Solution spaces and material overrides are applied.
MultipatchDomain build_domain(const RunConfig& config, const std::string& base_dir = "");

PhysicsProblem build_problem(const RunConfig& config);

struct RunSummary {
    std::string run_dir;
    std::vector<ConvergenceRecord> records;
};

/// Executes a full run: adaptive (or uniform) loop, then writes into
/// config.out_dir: config.txt, geometry.geo (when file-based), per-iteration
/// mesh_###.txt, convergence.csv, solution.txt and fields.vtk. Prints a
/// summary table to stdout.
RunSummary run_from_config(const RunConfig& config, const std::string& base_dir = "");

/// Re-exports `what` ("fields" or "mesh") from a finished run directory,
/// rebuilding the final discretization from the stored state.
void export_from_run_dir(const std::string& run_dir, const std::string& what);

}  // namespace thbx
