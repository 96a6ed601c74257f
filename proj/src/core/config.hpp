#pragma once

#include <map>
#include <optional>
#include <string>

#include "core/adaptivity.hpp"

namespace thbx {

/// Partial material override from a config file; unset fields keep the
/// problem defaults.
struct MaterialOverride {
    std::optional<double> mu_r;
    std::optional<Vec2> br;
    std::optional<double> jz;
};

/// Run configuration, parsed from flat `key = value` sections.
struct RunConfig {
    std::string problem = "poisson_peak";  // poisson_peak | magnetostatic_horseshoe | custom
    std::string geometry_path;             // required for the multipatch problems
    int degree = 2;
    int initial_elements = 2;
    std::string out_dir = "thbx_run";
    unsigned seed = 1234;
    bool record_timing = false;
    bool truncated = true;  // THB by default; HB when disabled

    std::string marking = "estimator";  // estimator | true_error | mark_all | uniform
    AdaptiveConfig adaptivity;

    std::map<std::string, MaterialOverride> material_overrides;

    int fields_resolution = 17;
    bool write_fields = true;
    bool write_mesh = true;
};

RunConfig parse_config_text(const std::string& text);
RunConfig parse_config_file(const std::string& path);

/// Field-by-field invariant checks; throws validation_error messages that
/// name the offending field. `base_dir` resolves relative geometry paths.
void validate_config(const RunConfig& config, const std::string& base_dir = "");

/// Serializes the resolved configuration back to config-file syntax.
std::string config_to_text(const RunConfig& config);

MarkingMode marking_mode_of(const RunConfig& config);

}  // namespace thbx
