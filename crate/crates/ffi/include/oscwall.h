#ifndef OSCWALL_H
#define OSCWALL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum OscStatus {
  OSC_STATUS_OK = 0,
  OSC_STATUS_NULL_POINTER = 1,
  OSC_STATUS_INVALID_ARGUMENT = 2,
  OSC_STATUS_PROFILE_NOT_NEGATIVE = 3,
  OSC_STATUS_NO_DOUBLE_CLUSTER = 4,
  OSC_STATUS_NERAV_VIOLATED = 5,
  OSC_STATUS_SOLVABILITY_VIOLATED = 6,
  OSC_STATUS_FACTORIZATION = 7,
  OSC_STATUS_NO_CONVERGENCE = 8,
  OSC_STATUS_IO = 9,
  OSC_STATUS_INTERNAL = 10,
} OscStatus;

// Cell constants plus the corrector coefficients of both branches.
typedef struct OscModel OscModel;

// A wall profile `F`.
typedef struct OscProfile OscProfile;

// Cell constants; decay rates are NaN when not available.
typedef struct OscCellConstants {
  double c;
  double c_i;
  double c_ii;
  double decay_rate_x;
  double decay_rate_xtilde;
} OscCellConstants;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version, a static NUL-terminated string.
const char *osc_version(void);

// Message of the last failed call on this thread, or NULL. Valid until the
// next call into the library from the same thread.
const char *osc_last_error_message(void);

// Parses a descriptor such as `cosine:d=1,a=0.4`.
//
// # Safety
// `desc` must be a NUL-terminated string; `out` must be writable.
enum OscStatus osc_profile_parse(const char *desc, struct OscProfile **out);

// `F(ξ)` and `F′(ξ)`; either out-pointer may be NULL.
//
// # Safety
// `p` must come from [`osc_profile_parse`].
enum OscStatus osc_profile_eval(const struct OscProfile *p,
                                double xi,
                                double *value,
                                double *slope);

// # Safety
// `p` must come from [`osc_profile_parse`] or be NULL.
void osc_profile_free(struct OscProfile *p);

// Cell constants on a strip of height `t` with `cphp` cells per half period.
//
// # Safety
// `p` must come from [`osc_profile_parse`]; `out` must be writable.
enum OscStatus osc_cell_solve(const struct OscProfile *p,
                              double t,
                              size_t cphp,
                              bool richardson,
                              struct OscCellConstants *out);

// Solves the cell problems and runs the corrector recurrence.
//
// # Safety
// `p` must come from [`osc_profile_parse`]; `out` must be writable.
enum OscStatus osc_model_build(const struct OscProfile *p,
                               double t,
                               size_t cphp,
                               bool richardson,
                               struct OscModel **out);

// Corrector recurrence with given constants `C, C_I, C_II`.
//
// # Safety
// `p` must come from [`osc_profile_parse`]; `out` must be writable.
enum OscStatus osc_model_from_constants(const struct OscProfile *p,
                                        double c,
                                        double c_i,
                                        double c_ii,
                                        struct OscModel **out);

// `λ₀ + Σ_{i≤order} εⁱλᵢ` for `branch` 1 or 2.
//
// # Safety
// `m` must come from a model constructor; `out` must be writable.
enum OscStatus osc_model_predict(const struct OscModel *m,
                                 uint32_t branch,
                                 double eps,
                                 uint32_t order,
                                 double *out);

// Writes `λ₀..λ₃` of branch 1, then of branch 2, into `out[0..8]`.
//
// # Safety
// `m` must come from a model constructor; `out` must hold 8 doubles.
enum OscStatus osc_model_coefficients(const struct OscModel *m, double *out);

// # Safety
// `m` must come from a model constructor or be NULL.
void osc_model_free(struct OscModel *m);

// The `count` FEM eigenvalues of `Ω^ε`, `ε = 1/(2n+1)`, closest to
// `target`, ascending.
//
// # Safety
// `p` must come from [`osc_profile_parse`]; `out` must hold `count` doubles.
enum OscStatus osc_eig_perturbed(const struct OscProfile *p,
                                 uint32_t n,
                                 size_t cphp,
                                 double h_bulk,
                                 double target,
                                 size_t count,
                                 double *out);

// Runs a study from a JSON configuration and returns the report as JSON.
// Output files are written only when the configuration names a directory.
//
// # Safety
// `config_json` must be a NUL-terminated string; `out` must be writable.
// The returned string is released with [`osc_string_free`].
enum OscStatus osc_study_run_json(const char *config_json, char **out);

// # Safety
// `s` must come from this library or be NULL.
void osc_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OSCWALL_H */
