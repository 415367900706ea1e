#ifndef SIGFORGE_H
#define SIGFORGE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function. `SF_STATUS_OK` is 0.
 */
typedef enum SfStatus {
  SF_STATUS_OK = 0,
  SF_STATUS_NULL_ARGUMENT = 1,
  SF_STATUS_INVALID_UTF8 = 2,
  SF_STATUS_IO = 3,
  SF_STATUS_PARSE = 4,
  SF_STATUS_INVALID_GRAPH = 5,
  SF_STATUS_INVALID_INPUT = 6,
  SF_STATUS_HARD_UNSAT = 7,
  SF_STATUS_OVERFLOW = 8,
  SF_STATUS_ZERO_SIGNATURE = 9,
  SF_STATUS_TOO_LARGE = 10,
  SF_STATUS_INTERNAL = 11,
} SfStatus;

/**
 * Verdict classes for approximate matching, weakest to strongest.
 */
typedef enum SfMatchKind {
  SF_MATCH_KIND_NO_MATCH = 0,
  SF_MATCH_KIND_ZERO_DAY_CANDIDATE = 1,
  SF_MATCH_KIND_OBFUSCATED = 2,
  SF_MATCH_KIND_EXACT = 3,
} SfMatchKind;

/**
 * Opaque handle to a component graph.
 */
typedef struct SfIccg SfIccg;

/**
 * Opaque handle to a synthesized family signature.
 */
typedef struct SfSignature SfSignature;

/**
 * Opaque handle to a metadata weight table.
 */
typedef struct SfWeights SfWeights;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread. Empty string
 * when no failure occurred yet. Valid until the next failing call.
 */
const char *sf_last_error_message(void);

/**
 * Loads a component graph from a JSON file.
 */
enum SfStatus sf_iccg_load(const char *path, struct SfIccg **out);

/**
 * Parses a component graph from JSON text.
 */
enum SfStatus sf_iccg_from_json(const char *text, struct SfIccg **out);

/**
 * Serializes a graph to its canonical JSON text. Returns NULL on a null
 * handle. Free the returned string with `sf_string_free`.
 */
char *sf_iccg_to_json(const struct SfIccg *graph);

/**
 * Number of vertices in the graph, including the system vertex. Returns 0
 * on a null handle.
 */
uintptr_t sf_iccg_vertex_count(const struct SfIccg *graph);

void sf_iccg_free(struct SfIccg *graph);

/**
 * Frees a string returned by this library.
 */
void sf_string_free(char *s);

/**
 * Loads a weight table from a JSON file.
 */
enum SfStatus sf_weights_load(const char *path, struct SfWeights **out);

/**
 * Computes inverse-frequency weights from `count` benign graphs. `benign`
 * may be NULL when `count` is 0, which yields the default table where every
 * label weighs 1.
 */
enum SfStatus sf_weights_compute(const struct SfIccg *const *benign,
                                 uintptr_t count,
                                 struct SfWeights **out);

void sf_weights_free(struct SfWeights *weights);

/**
 * Loads a signature from a JSON file.
 */
enum SfStatus sf_signature_load(const char *path, struct SfSignature **out);

/**
 * Writes a signature to a JSON file.
 */
enum SfStatus sf_signature_save(const struct SfSignature *signature, const char *path);

/**
 * Returns a new handle to the signature's graph. Free it with
 * `sf_iccg_free`. Returns NULL on a null handle.
 */
struct SfIccg *sf_signature_graph(const struct SfSignature *signature);

/**
 * 1 when the signature carries no structure (nothing beyond the system
 * vertex), 0 otherwise, -1 on a null handle.
 */
int sf_signature_is_empty(const struct SfSignature *signature);

void sf_signature_free(struct SfSignature *signature);

/**
 * Synthesizes the family signature of `count` sample graphs under the given
 * weight table.
 */
enum SfStatus sf_infer_signature(const struct SfIccg *const *samples,
                                 uintptr_t count,
                                 const struct SfWeights *weights,
                                 const char *family,
                                 struct SfSignature **out);

/**
 * 1 when the signature graph embeds exactly into the app, 0 when it does
 * not, -1 on a null handle.
 */
int sf_exact_match(const struct SfSignature *signature, const struct SfIccg *app);

/**
 * Classifies `app` against one signature. Cutoffs must satisfy
 * 0 <= zero_day_cutoff <= obfuscated_cutoff <= 1; the library defaults are
 * 0.5 and 0.8. On success writes the verdict kind and the similarity delta.
 */
enum SfStatus sf_approx_match(const struct SfIccg *app,
                              const struct SfSignature *signature,
                              const struct SfWeights *weights,
                              double zero_day_cutoff,
                              double obfuscated_cutoff,
                              enum SfMatchKind *out_kind,
                              double *out_delta);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SIGFORGE_H */
