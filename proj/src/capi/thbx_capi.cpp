#include "thbx/thbx.h"

#include <cstdio>
#include <filesystem>
#include <string>

#include "core/errors.hpp"
#include "core/runner.hpp"
#include "core/verify.hpp"

namespace {

thread_local std::string g_last_error;

thbx_status classify(const std::exception& e) {
    g_last_error = e.what();
    if (dynamic_cast<const thbx::validation_error*>(&e)) return THBX_INVALID_ARGUMENT;
    if (dynamic_cast<const thbx::solver_error*>(&e)) return THBX_SOLVER_ERROR;
    if (dynamic_cast<const thbx::io_error*>(&e)) return THBX_IO_ERROR;
    if (dynamic_cast<const thbx::geometry_error*>(&e)) return THBX_INVALID_ARGUMENT;
    return THBX_ERROR;
}

}  // namespace

struct thbx_run {
    thbx::RunSummary summary;
};

extern "C" {

const char* thbx_version(void) { return "0.1.0"; }

const char* thbx_last_error(void) { return g_last_error.c_str(); }

thbx_status thbx_run_config(const char* config_path, thbx_run** out_run) {
    if (out_run) *out_run = nullptr;
    if (!config_path) {
        g_last_error = "config_path is null";
        return THBX_INVALID_ARGUMENT;
    }
    try {
        const thbx::RunConfig cfg = thbx::parse_config_file(config_path);
        const std::string base_dir =
            std::filesystem::path(config_path).parent_path().string();
        auto run = new thbx_run{thbx::run_from_config(cfg, base_dir)};
        if (out_run)
            *out_run = run;
        else
            delete run;
        g_last_error.clear();
        return THBX_OK;
    } catch (const std::exception& e) {
        return classify(e);
    }
}

int thbx_run_num_iterations(const thbx_run* run) {
    return run ? static_cast<int>(run->summary.records.size()) : 0;
}

thbx_status thbx_run_iteration(const thbx_run* run, int index, thbx_iteration_info* out_info) {
    if (!run || !out_info || index < 0 ||
        index >= static_cast<int>(run->summary.records.size())) {
        g_last_error = "thbx_run_iteration: bad handle or index";
        return THBX_INVALID_ARGUMENT;
    }
    const thbx::ConvergenceRecord& r = run->summary.records[static_cast<std::size_t>(index)];
    out_info->iter = r.iter;
    out_info->dofs = r.dofs;
    out_info->elements = r.elements;
    out_info->l2_error = r.l2_error;
    out_info->estimator_total = r.estimator_total;
    out_info->seconds = r.seconds;
    return THBX_OK;
}

const char* thbx_run_output_dir(const thbx_run* run) {
    return run ? run->summary.run_dir.c_str() : "";
}

void thbx_run_destroy(thbx_run* run) { delete run; }

thbx_status thbx_export(const char* run_dir, const char* what) {
    if (!run_dir || !what) {
        g_last_error = "thbx_export: null argument";
        return THBX_INVALID_ARGUMENT;
    }
    try {
        thbx::export_from_run_dir(run_dir, what);
        g_last_error.clear();
        return THBX_OK;
    } catch (const std::exception& e) {
        return classify(e);
    }
}

thbx_status thbx_verify(int inject_fault, int* out_failures) {
    if (out_failures) *out_failures = 0;
    try {
        const auto results = thbx::verify_battery(inject_fault != 0);
        int failures = 0;
        for (const auto& r : results) {
            std::printf("[%s] %s: %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(),
                        r.detail.c_str());
            if (!r.pass) ++failures;
        }
        std::fflush(stdout);
        if (out_failures) *out_failures = failures;
        g_last_error.clear();
        return THBX_OK;
    } catch (const std::exception& e) {
        return classify(e);
    }
}

}  // extern "C"
