#ifndef EXITLENS_H
#define EXITLENS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ExlParseStatus {
  EXL_PARSE_STATUS_PARSED = 0,
  EXL_PARSE_STATUS_FALLBACK_PARSED = 1,
  EXL_PARSE_STATUS_UNPARSEABLE = 2,
} ExlParseStatus;

typedef enum ExlStatus {
  EXL_STATUS_OK = 0,
  EXL_STATUS_NULL_ARGUMENT = 1,
  EXL_STATUS_INVALID_ARGUMENT = 2,
  EXL_STATUS_INVALID_UTF8 = 3,
  EXL_STATUS_PARSE = 4,
  EXL_STATUS_MODEL = 5,
  EXL_STATUS_INTERNAL = 6,
} ExlStatus;

/**
 * Opaque boosted-tree model.
 */
typedef struct ExlModel ExlModel;

typedef struct ExlReport {
  double accuracy;
  double precision;
  double recall;
  double f1_positive;
  double f1_macro;
  uint64_t tp;
  uint64_t fp;
  uint64_t tn;
  uint64_t fn_;
} ExlReport;

typedef struct ExlBertScore {
  double precision;
  double recall;
  double f1;
} ExlBertScore;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *exl_last_error(void);

/**
 * Library version as a static string.
 */
const char *exl_version(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void exl_string_free(char *s);

/**
 * Fits a model on a row-major `n_rows x n_features` matrix. `config_json`
 * may be null for defaults; missing keys take their defaults.
 *
 * # Safety
 * `x` must hold `n_rows * n_features` values, `y` `n_rows` labels and
 * `out` must be writable.
 */
enum ExlStatus exl_gbdt_fit(const double *x,
                            size_t n_rows,
                            size_t n_features,
                            const uint8_t *y,
                            const char *config_json,
                            struct ExlModel **out);

/**
 * Loads a model from its JSON form.
 *
 * # Safety
 * `json` must be a nul-terminated string and `out` writable.
 */
enum ExlStatus exl_gbdt_from_json(const char *json, struct ExlModel **out);

/**
 * Serializes a model; free the result with [`exl_string_free`].
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum ExlStatus exl_gbdt_to_json(const struct ExlModel *model, char **out);

/**
 * Number of features the model expects.
 *
 * # Safety
 * `model` must be a live handle or null (which yields 0).
 */
size_t exl_gbdt_n_features(const struct ExlModel *model);

/**
 * Writes one positive-class probability per row into `out`.
 *
 * # Safety
 * `x` must hold `n_rows * n_features` values and `out` `n_rows` slots.
 */
enum ExlStatus exl_gbdt_predict_proba(const struct ExlModel *model,
                                      const double *x,
                                      size_t n_rows,
                                      size_t n_features,
                                      double *out);

/**
 * Releases a model. Null is ignored.
 *
 * # Safety
 * `model` must come from this library and not be freed twice.
 */
void exl_gbdt_free(struct ExlModel *model);

/**
 * Binary classification report over `n` aligned 0/1 predictions and labels.
 *
 * # Safety
 * `preds` and `labels` must hold `n` values and `out` must be writable.
 */
enum ExlStatus exl_classification_report(const uint8_t *preds,
                                         const uint8_t *labels,
                                         size_t n,
                                         struct ExlReport *out);

/**
 * Unweighted BERTScore between row-major token embedding matrices.
 *
 * # Safety
 * `candidate` must hold `n_candidate * dim` values, `reference`
 * `n_reference * dim`, and `out` must be writable.
 */
enum ExlStatus exl_bertscore(const double *candidate,
                             size_t n_candidate,
                             const double *reference,
                             size_t n_reference,
                             size_t dim,
                             struct ExlBertScore *out);

/**
 * Renders a profile (JSON, as in `profiles.jsonl`) into chat text with the
 * default templates and options. `with_target` adds the assistant turn.
 * Free the result with [`exl_string_free`].
 *
 * # Safety
 * String arguments must be nul-terminated and `out` writable.
 */
enum ExlStatus exl_render_prompt(const char *profile_json,
                                 const char *variant,
                                 bool with_target,
                                 size_t max_tokens,
                                 char **out);

/**
 * Parses a model completion. `out_label` receives 1, 0 or -1 when no label
 * was found. `out_justification` may be null; otherwise it receives a new
 * string or null when there is no justification.
 *
 * # Safety
 * `text` must be nul-terminated; non-null out pointers must be writable.
 */
enum ExlStatus exl_parse_response(const char *text,
                                  int32_t *out_label,
                                  enum ExlParseStatus *out_status,
                                  char **out_justification);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EXITLENS_H */
