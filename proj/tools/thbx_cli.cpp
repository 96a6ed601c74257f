// Command-line front end; talks to the core exclusively through the C API.

#include <cstdio>
#include <cstdlib>
#include <string>

#include <CLI11.hpp>

#include "thbx/thbx.h"

namespace {

int status_to_exit(thbx_status st) {
    if (st != THBX_OK) std::fprintf(stderr, "error: %s\n", thbx_last_error());
    return static_cast<int>(st);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adaptive isogeometric analysis with truncated hierarchical B-splines "
                 "via multi-level Bezier extraction"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(thbx_version()));

    // honored for forward compatibility; the current build runs single-threaded
    if (const char* threads = std::getenv("THBX_THREADS"); threads && *threads)
        (void)threads;

    std::string config_path;
    CLI::App* run = app.add_subcommand("run", "execute a configuration file");
    run->add_option("config", config_path, "path to the run configuration")->required();

    bool inject_fault = false;
    CLI::App* verify = app.add_subcommand("verify", "run the built-in verification battery");
    verify->add_flag("--inject-fault", inject_fault,
                     "corrupt one extraction operator entry (negative control)");

    std::string what;
    std::string from_dir;
    CLI::App* exp = app.add_subcommand("export", "re-export artifacts from a run directory");
    exp->add_option("--what", what, "fields | mesh")->required();
    exp->add_option("--from", from_dir, "run directory")->required();

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) {
        thbx_run* handle = nullptr;
        const thbx_status st = thbx_run_config(config_path.c_str(), &handle);
        thbx_run_destroy(handle);
        return status_to_exit(st);
    }
    if (verify->parsed()) {
        int failures = 0;
        const thbx_status st = thbx_verify(inject_fault ? 1 : 0, &failures);
        if (st != THBX_OK) return status_to_exit(st);
        if (failures > 0) {
            std::fprintf(stderr, "%d verification check(s) failed\n", failures);
            return 1;
        }
        return 0;
    }
    if (exp->parsed()) return status_to_exit(thbx_export(from_dir.c_str(), what.c_str()));
    return 0;
}
