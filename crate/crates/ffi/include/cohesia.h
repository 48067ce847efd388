#ifndef COHESIA_H
#define COHESIA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum CohesiaStatus {
  COHESIA_STATUS_OK = 0,
  COHESIA_STATUS_NULL_ARGUMENT = 1,
  COHESIA_STATUS_INVALID_UTF8 = 2,
  COHESIA_STATUS_INVALID_OPTIONS = 3,
  COHESIA_STATUS_PARSE_ERROR = 4,
  COHESIA_STATUS_PROVIDER_ERROR = 5,
  COHESIA_STATUS_ANALYSIS_ERROR = 6,
  COHESIA_STATUS_STATS_ERROR = 7,
  COHESIA_STATUS_PANIC = 8,
} CohesiaStatus;

typedef enum CohesiaFormat {
  COHESIA_FORMAT_JSON = 0,
  COHESIA_FORMAT_MARKDOWN = 1,
} CohesiaFormat;

/**
 * Opaque analysis result.
 */
typedef struct CohesiaReport CohesiaReport;

/**
 * Document-level indices of a report.
 */
typedef struct CohesiaMetrics {
  double eci;
  double epi;
  double cci;
  double ici;
  size_t section_count;
  size_t finding_count;
  size_t warning_count;
} CohesiaMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Analyze a JSON document (`{"id": ..., "sections": [{"heading", "text"}]}`).
 *
 * `options_json` may be null. On success `*out` receives a new report.
 *
 * # Safety
 * String arguments must be null or NUL-terminated; `out` must be writable.
 */
enum CohesiaStatus cohesia_analyze_json(const char *document_json,
                                        const char *options_json,
                                        struct CohesiaReport **out);

/**
 * Analyze plain text whose sections are separated by `===` lines.
 *
 * # Safety
 * As for [`cohesia_analyze_json`].
 */
enum CohesiaStatus cohesia_analyze_text(const char *doc_id,
                                        const char *text,
                                        const char *options_json,
                                        struct CohesiaReport **out);

/**
 * # Safety
 * `report` must be null or a live handle; `out` must be writable.
 */
enum CohesiaStatus cohesia_report_metrics(const struct CohesiaReport *report,
                                          struct CohesiaMetrics *out);

/**
 * Render the report; `*out` receives a string to free with
 * [`cohesia_string_free`].
 *
 * # Safety
 * `report` must be null or a live handle; `out` must be writable.
 */
enum CohesiaStatus cohesia_report_render(const struct CohesiaReport *report,
                                         enum CohesiaFormat format,
                                         char **out);

/**
 * # Safety
 * `report` must be null or a handle not yet freed.
 */
void cohesia_report_free(struct CohesiaReport *report);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void cohesia_string_free(char *s);

/**
 * Pearson chi-square test (1 dof, no continuity correction) on the 2x2
 * table `{a, b, c, d}` in row-major order.
 *
 * # Safety
 * `table` must point to 4 readable doubles; the outputs must be writable.
 */
enum CohesiaStatus cohesia_chi_square_2x2(const double *table, double *statistic, double *p_value);

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call into the library from the same thread.
 */
const char *cohesia_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *cohesia_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COHESIA_H */
