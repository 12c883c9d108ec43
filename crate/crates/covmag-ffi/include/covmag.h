#ifndef COVMAG_H
#define COVMAG_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Table format for rendered sweep files.
enum CovmagFormat
#ifdef __cplusplus
  : int32_t
#endif // __cplusplus
 {
  COVMAG_FORMAT_CSV = 0,
  COVMAG_FORMAT_JSON = 1,
};
#ifndef __cplusplus
typedef int32_t CovmagFormat;
#endif // __cplusplus

// Status codes returned by every fallible function.
enum CovmagStatus
#ifdef __cplusplus
  : int32_t
#endif // __cplusplus
 {
  COVMAG_STATUS_OK = 0,
  COVMAG_STATUS_NULL_ARGUMENT = 1,
  COVMAG_STATUS_INVALID_UTF8 = 2,
  COVMAG_STATUS_CONFIG = 3,
  COVMAG_STATUS_DOMAIN = 4,
  COVMAG_STATUS_IO = 5,
  COVMAG_STATUS_SIMULATION = 6,
  COVMAG_STATUS_BUFFER_TOO_SMALL = 7,
  COVMAG_STATUS_PANIC = 8,
  COVMAG_STATUS_SELF_TEST_FAILED = 9,
};
#ifndef __cplusplus
typedef int32_t CovmagStatus;
#endif // __cplusplus

// Parsed experiment configuration.
typedef struct CovmagConfig CovmagConfig;

// Completed run with its summary and output files.
typedef struct CovmagRun CovmagRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message. An empty string means the
// last call succeeded.
//
// # Safety
// `buf` must be valid for `cap` bytes or null; `needed` must be valid.
CovmagStatus covmag_last_error_message(char *buf, size_t cap, size_t *needed);

// Library version as a static NUL-terminated string.
const char *covmag_version(void);

// Parses a config from text. `json` selects JSON instead of TOML.
//
// # Safety
// `text` must be a NUL-terminated string; `out_config` must be valid.
CovmagStatus covmag_config_parse(const char *text, bool json, struct CovmagConfig **out_config);

// Loads a config file; the format follows the extension.
//
// # Safety
// `path` must be a NUL-terminated string; `out_config` must be valid.
CovmagStatus covmag_config_load(const char *path, struct CovmagConfig **out_config);

// Replaces the master seed.
//
// # Safety
// `config` must come from a config constructor and not be freed.
CovmagStatus covmag_config_set_seed(struct CovmagConfig *config, uint64_t seed);

// Copies the protocol id (for example `bell-covar`).
//
// # Safety
// `config` must be a live handle; `buf` valid for `cap` bytes or null; `needed` valid.
CovmagStatus covmag_config_protocol(const struct CovmagConfig *config,
                                    char *buf,
                                    size_t cap,
                                    size_t *needed);

// Releases a config. Null is ignored.
//
// # Safety
// `config` must be null or a live handle that is not used afterwards.
void covmag_config_free(struct CovmagConfig *config);

// Runs every point of the config.
//
// # Safety
// `config` must be a live handle; `out_run` must be valid.
CovmagStatus covmag_run(const struct CovmagConfig *config, struct CovmagRun **out_run);

// Whether every built-in consistency check of the run passed.
//
// # Safety
// `run` must be a live handle; `passed` must be valid.
CovmagStatus covmag_run_checks_passed(const struct CovmagRun *run, bool *passed);

// Copies the summary document (config echo, results, checks) as JSON.
//
// # Safety
// `run` must be a live handle; `buf` valid for `cap` bytes or null; `needed` valid.
CovmagStatus covmag_run_summary_json(const struct CovmagRun *run,
                                     char *buf,
                                     size_t cap,
                                     size_t *needed);

// Writes the summary, sweep table and per-shot files into `dir`.
//
// # Safety
// `run` must be a live handle; `dir` a NUL-terminated string.
CovmagStatus covmag_run_write(const struct CovmagRun *run, const char *dir, CovmagFormat format);

// Releases a run. Null is ignored.
//
// # Safety
// `run` must be null or a live handle that is not used afterwards.
void covmag_run_free(struct CovmagRun *run);

// SNR gain of the entangled protocol over a non-interacting pair at readout
// noise `sigma_r` and gate decoherence exponent `chi_e`. `exact` selects the
// full ratio instead of its large-noise limit.
//
// # Safety
// `gain` must be valid.
CovmagStatus covmag_snr_gain(double sigma_r, double chi_e, bool exact, double *gain);

// ⟨sin φ_a sin φ_b⟩ for perfectly correlated Gaussian phases with
// decoherence exponent `chi_c`.
//
// # Safety
// `moment` must be valid.
CovmagStatus covmag_correlated_sin_moment(double chi_c, double *moment);

// Minimum detectable rms field (T) of the entangled protocol for a total
// averaging time. Times in seconds.
//
// # Safety
// `sigma_b` must be valid.
CovmagStatus covmag_sensitivity_min(double t,
                                    double t_e,
                                    double t_r,
                                    double total_time,
                                    double t2,
                                    double sigma_r,
                                    double *sigma_b);

// Runs the invariant suite. `failures` receives the number of failing
// checks; the status is `COVMAG_STATUS_SELF_TEST_FAILED` when it is nonzero and
// the last error message lists their ids.
//
// # Safety
// `failures` must be valid.
CovmagStatus covmag_selftest(uint32_t *failures);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COVMAG_H */
