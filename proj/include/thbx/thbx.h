/* thbx - adaptive isogeometric analysis with truncated hierarchical
 * B-splines and multi-level Bezier extraction.
 *
 * C API of the shared library. All entry points return a thbx_status;
 * thbx_last_error() describes the most recent failure on the calling
 * thread. Objects are opaque handles released with their destroy call.
 */
#ifndef THBX_H
#define THBX_H

#ifdef __cplusplus
extern "C" {
#endif

typedef enum thbx_status {
    THBX_OK = 0,
    THBX_ERROR = 1,            /* generic failure / failed checks */
    THBX_INVALID_ARGUMENT = 2, /* validation error (bad config, geometry, args) */
    THBX_SOLVER_ERROR = 3,     /* linear solver failure */
    THBX_IO_ERROR = 4          /* filesystem / serialization failure */
} thbx_status;

const char* thbx_version(void);

/* Message for the last error on this thread; empty string if none. */
const char* thbx_last_error(void);

/* ------------------------------------------------------------------ */
/* runs                                                                */
/* ------------------------------------------------------------------ */

typedef struct thbx_run thbx_run;

typedef struct thbx_iteration_info {
    int iter;
    int dofs;
    int elements;
    double l2_error;
    double estimator_total;
    double seconds;
} thbx_iteration_info;

/* Executes the configuration file (adaptive loop plus exports); outputs go
 * to the config's out_dir, resolved relative to the config file. */
thbx_status thbx_run_config(const char* config_path, thbx_run** out_run);

int thbx_run_num_iterations(const thbx_run* run);
thbx_status thbx_run_iteration(const thbx_run* run, int index, thbx_iteration_info* out_info);
const char* thbx_run_output_dir(const thbx_run* run);
void thbx_run_destroy(thbx_run* run);

/* Re-exports "fields" or "mesh" from a finished run directory. */
thbx_status thbx_export(const char* run_dir, const char* what);

/* ------------------------------------------------------------------ */
/* verification battery                                                */
/* ------------------------------------------------------------------ */

/* Runs the built-in checks, printing one PASS/FAIL line per check to
 * stdout. *out_failures receives the number of failed checks.
 * inject_fault != 0 corrupts one extraction operator entry as a negative
 * control; the assembly-equivalence check must then fail. */
thbx_status thbx_verify(int inject_fault, int* out_failures);

#ifdef __cplusplus
}
#endif

#endif /* THBX_H */
