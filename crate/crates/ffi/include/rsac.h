#ifndef RSAC_H
#define RSAC_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdint.h>
#include <stddef.h>

/*
 Status codes. Values 2 to 4 match the command-line exit codes.
 */
typedef enum RsacStatus {
  RSAC_STATUS_OK = 0,
  /*
   A required pointer was null or an argument was out of range.
   */
  RSAC_STATUS_INVALID_ARGUMENT = 1,
  /*
   Malformed histogram text or JSON.
   */
  RSAC_STATUS_INPUT_ERROR = 2,
  /*
   The estimator could not be built from the data.
   */
  RSAC_STATUS_CONSTRUCTION_ERROR = 3,
  /*
   Evaluation produced an inconsistent or non-finite value.
   */
  RSAC_STATUS_NUMERIC_ERROR = 4,
  /*
   A Rust panic was caught at the boundary.
   */
  RSAC_STATUS_PANIC = 5,
} RsacStatus;

/*
 Opaque fitted estimator.
 */
typedef struct RsacEstimator RsacEstimator;

/*
 Opaque frequency histogram.
 */
typedef struct RsacHistogram RsacHistogram;

/*
 Bootstrap summary at one `(r, t)` point.
 */
typedef struct RsacInterval {
  double point;
  double se;
  double ci_low;
  double ci_high;
} RsacInterval;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread, or null. The pointer
 stays valid until the next failing call on the same thread.
 */
const char *rsac_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *rsac_version(void);

/*
 Creates an empty histogram.
 */
struct RsacHistogram *rsac_histogram_new(void);

/*
 Parses the two-column `multiplicity count` text format.

 # Safety
 `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum RsacStatus rsac_histogram_parse(const char *text, struct RsacHistogram **out);

/*
 Adds `count` species seen exactly `multiplicity` times.

 # Safety
 `hist` must come from this library and not have been freed.
 */
enum RsacStatus rsac_histogram_add(struct RsacHistogram *hist,
                                   uint64_t multiplicity,
                                   uint64_t count);

/*
 Number of observed species `S_1`.

 # Safety
 `hist` must be a live handle and `out` a valid pointer.
 */
enum RsacStatus rsac_histogram_species(const struct RsacHistogram *hist, uint64_t *out);

/*
 Releases a histogram. Null is ignored.

 # Safety
 `hist` must be null or a live handle; it must not be used afterwards.
 */
void rsac_histogram_free(struct RsacHistogram *hist);

/*
 Builds the estimator with order cap `m_max` (10 is the usual choice).

 # Safety
 `hist` must be a live handle and `out` a valid pointer.
 */
enum RsacStatus rsac_estimator_construct(const struct RsacHistogram *hist,
                                         uintptr_t m_max,
                                         struct RsacEstimator **out);

/*
 Builds the estimator from tail sums `S_1..S_len`.

 # Safety
 `tail` must point to `len` readable doubles and `out` must be valid.
 */
enum RsacStatus rsac_estimator_from_tail_sums(const double *tail,
                                              uintptr_t len,
                                              uintptr_t m_max,
                                              struct RsacEstimator **out);

/*
 Restores an estimator from its JSON form.

 # Safety
 `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum RsacStatus rsac_estimator_from_json(const char *json, struct RsacEstimator **out);

/*
 Serializes an estimator to JSON. Release the string with
 [`rsac_string_free`].

 # Safety
 `est` must be a live handle and `out` a valid pointer.
 */
enum RsacStatus rsac_estimator_to_json(const struct RsacEstimator *est, char **out);

/*
 Number of terms `m` of the estimator.

 # Safety
 `est` must be a live handle and `out` a valid pointer.
 */
enum RsacStatus rsac_estimator_order(const struct RsacEstimator *est, uintptr_t *out);

/*
 Expected number of species seen at least `r` times at effort `t`.

 # Safety
 `est` must be a live handle and `out` a valid pointer.
 */
enum RsacStatus rsac_estimator_evaluate(const struct RsacEstimator *est,
                                        uint32_t r,
                                        double t,
                                        double *out);

/*
 Releases an estimator. Null is ignored.

 # Safety
 `est` must be null or a live handle; it must not be used afterwards.
 */
void rsac_estimator_free(struct RsacEstimator *est);

/*
 Bootstrap standard error and lognormal interval at `(r, t)` from
 `replicates` resamples drawn with `seed`.

 # Safety
 `hist` must be a live handle and `out` a valid pointer.
 */
enum RsacStatus rsac_bootstrap(const struct RsacHistogram *hist,
                               uint32_t r,
                               double t,
                               uintptr_t replicates,
                               double level,
                               uint64_t seed,
                               struct RsacInterval *out);

/*
 Releases a string returned by this library. Null is ignored.

 # Safety
 `s` must be null or a string from this library, freed at most once.
 */
void rsac_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RSAC_H */
