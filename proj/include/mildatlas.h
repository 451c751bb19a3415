/*
 * C interface to the chart-parameterization engine: parse prepared families,
 * build certified atlases, verify norm bounds and emit JSON reports.
 *
 * All functions returning ma_status set a thread-local error message
 * retrievable through ma_last_error(). Strings handed out through `char**`
 * parameters are heap-allocated and must be released with ma_string_free().
 */

#ifndef MILDATLAS_H
#define MILDATLAS_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ma_status {
    MA_OK = 0,
    MA_VERIFY_FAILED = 1,  /* a checked bound does not hold */
    MA_INVALID_INPUT = 2,  /* malformed document or violated precondition */
    MA_INTERNAL_ERROR = 3
} ma_status;

typedef struct ma_family ma_family;
typedef struct ma_atlas ma_atlas;

/* Message of the last failing call on this thread ("" when none). */
const char* ma_last_error(void);

void ma_string_free(char* s);

/* --- prepared families --------------------------------------------------- */

/* Parses and fully validates a family document (JSON). */
ma_status ma_family_parse(const char* json, ma_family** out);
void ma_family_free(ma_family* fam);

ma_status ma_family_serialize(const ma_family* fam, char** json_out);

/* Uniform derivative-bound certificates, wall diagnostics and the audit
 * trail, as one JSON document. MA_VERIFY_FAILED when a certificate cannot be
 * produced (the report still explains why). */
ma_status ma_family_certify(const ma_family* fam, char** report_out);

/* Evaluates one member: t_len == k, x_len == m, values_len == n - m.
 * member_out receives 1 when x lies inside the open cell. */
ma_status ma_family_evaluate(const ma_family* fam, const double* t, size_t t_len,
                             const double* x, size_t x_len, double* values_out,
                             size_t values_len, int* member_out);

/* Dimensions of the family (any output may be null). */
ma_status ma_family_shape(const ma_family* fam, int* k_out, int* m_out, int* n_out);

/* Midpoint of the parameter box; t_len must be at least k. */
ma_status ma_family_parameter_midpoint(const ma_family* fam, double* t_out, size_t t_len);

/* --- atlases --------------------------------------------------------------- */

/* mode: 0 standard, 1 improved (falls back to standard with a note in the
 * emitted document when the wall shapes are outside the handled cases). */
ma_status ma_atlas_build(const ma_family* fam, const double* t, size_t t_len, int r,
                         int mode, ma_atlas** out);
void ma_atlas_free(ma_atlas* atlas);

ma_status ma_atlas_to_json(const ma_atlas* atlas, char** json_out);
ma_status ma_atlas_parse(const char* json, ma_atlas** out);

long long ma_atlas_chart_count(const ma_atlas* atlas);

/* Checks the pointwise norm bound of every (capped, deterministic) chart
 * selection and writes the JSON report either way. Non-positive samples,
 * negative margin/tol select the defaults (500, 1e-9, 1e-9). When fam is
 * non-null the coverage check runs as well. Returns MA_VERIFY_FAILED when a
 * chart or coverage check fails. */
ma_status ma_atlas_verify(const ma_atlas* atlas, const ma_family* fam, int samples,
                          double margin, double tol, char** report_out);

/* --- growth ----------------------------------------------------------------- */

/* Chart counts for r in [r_min, r_max] and the fitted log-log slope. */
ma_status ma_growth(const ma_family* fam, const double* t, size_t t_len, int r_min,
                    int r_max, int mode, char** report_out);

/* --- selftest ---------------------------------------------------------------- */

/* Runs the built-in example suite; log_out (optional) receives one line per
 * check. Returns MA_VERIFY_FAILED when any check fails. */
ma_status ma_selftest(char** log_out);

#ifdef __cplusplus
}
#endif

#endif /* MILDATLAS_H */
