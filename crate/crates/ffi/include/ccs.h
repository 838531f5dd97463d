#ifndef CCS_H
#define CCS_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum CcsStatus {
  CCS_STATUS_OK = 0,
  CCS_STATUS_NULL_ARGUMENT = 1,
  CCS_STATUS_INVALID_UTF8 = 2,
  CCS_STATUS_VALIDATION = 3,
  CCS_STATUS_UNSUPPORTED = 4,
  CCS_STATUS_SAMPLING = 5,
  CCS_STATUS_LINEAR_ALGEBRA = 6,
  CCS_STATUS_PROPAGATION = 7,
  CCS_STATUS_TOLERANCE = 8,
  CCS_STATUS_CONFIRMATION = 9,
  CCS_STATUS_IO = 10,
  CCS_STATUS_OUT_OF_RANGE = 11,
  CCS_STATUS_NOT_AVAILABLE = 12,
  CCS_STATUS_PANIC = 13,
  CCS_STATUS_OTHER = 14,
} CcsStatus;

// Which engine's observable series to read from a report.
typedef enum CcsEngine {
  CCS_ENGINE_CCS = 0,
  CCS_ENGINE_SPLITOP = 1,
} CcsEngine;

// Opaque run configuration.
typedef struct CcsConfig CcsConfig;

// Opaque result of a run.
typedef struct CcsReport CcsReport;

// One recorded time. `autocorr_re`/`autocorr_im` are NaN when not recorded.
typedef struct CcsRecord {
  double t;
  double norm;
  double kinetic_s;
  double potential_s;
  double bath;
  double interaction;
  double counter;
  double total;
  double c_s;
  double autocorr_re;
  double autocorr_im;
  double density_integral;
} CcsRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. Valid until the next call.
const char *ccs_last_error_message(void);

// Library version as a static string.
const char *ccs_version(void);

// # Safety
// `s` must be NULL or a string returned by this library.
void ccs_string_free(char *s);

// Parse a TOML configuration.
//
// # Safety
// `toml` must be a NUL-terminated string and `out` a valid pointer.
enum CcsStatus ccs_config_from_toml(const char *toml, struct CcsConfig **out);

// Load a built-in preset by name.
//
// # Safety
// `name` must be a NUL-terminated string and `out` a valid pointer.
enum CcsStatus ccs_config_from_preset(const char *name, struct CcsConfig **out);

// # Safety
// `cfg` must be NULL or a handle from this library, not yet freed.
void ccs_config_free(struct CcsConfig *cfg);

// # Safety
// `cfg` must be a live handle.
enum CcsStatus ccs_config_set_seed(struct CcsConfig *cfg, uint64_t seed);

// # Safety
// `cfg` must be a live handle and `dir` a NUL-terminated string.
enum CcsStatus ccs_config_set_output_dir(struct CcsConfig *cfg, const char *dir);

// Check the configuration without running it.
//
// # Safety
// `cfg` must be a live handle.
enum CcsStatus ccs_config_validate(const struct CcsConfig *cfg);

// Serialize the configuration, defaults filled in.
//
// # Safety
// `cfg` must be a live handle and `out` a valid pointer.
enum CcsStatus ccs_config_to_toml(const struct CcsConfig *cfg, char **out);

// Run every engine of the configuration in memory. Long runs are not gated here.
//
// # Safety
// `cfg` must be a live handle and `out` a valid pointer.
enum CcsStatus ccs_execute(const struct CcsConfig *cfg, struct CcsReport **out);

// Run and write all artifacts into the configured output directory.
//
// # Safety
// `cfg` must be a live handle and `out` a valid pointer.
enum CcsStatus ccs_run_and_write(const struct CcsConfig *cfg, struct CcsReport **out);

// # Safety
// `report` must be NULL or a handle from this library, not yet freed.
void ccs_report_free(struct CcsReport *report);

// Number of records an engine produced.
//
// # Safety
// `report` must be a live handle and `out` a valid pointer.
enum CcsStatus ccs_report_record_count(const struct CcsReport *report,
                                       enum CcsEngine engine,
                                       size_t *out);

// # Safety
// `report` must be a live handle and `out` a valid pointer.
enum CcsStatus ccs_report_record(const struct CcsReport *report,
                                 enum CcsEngine engine,
                                 size_t index,
                                 struct CcsRecord *out);

// Cross-engine verdict of a two-engine run: `*passed` and the judged deviation.
//
// # Safety
// `report` must be a live handle; `passed` and `deviation` valid pointers.
enum CcsStatus ccs_report_comparison(const struct CcsReport *report,
                                     bool *passed,
                                     double *deviation);

// Lowest eigenvalues of the bare double well on `n_points` points of
// `[x_min, x_max]`, with squared overlaps against the initial Gaussian.
// Writes `min(capacity, n_points)` entries into each array.
//
// # Safety
// `energies` and `overlaps_sq` must each hold `capacity` doubles; `written` must be valid.
enum CcsStatus ccs_double_well_levels(double x_min,
                                      double x_max,
                                      size_t n_points,
                                      double *energies,
                                      double *overlaps_sq,
                                      size_t capacity,
                                      size_t *written);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CCS_H */
