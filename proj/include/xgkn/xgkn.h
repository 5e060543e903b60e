/* C interface to the xgkn library: explainable graph kernel networks, the
 * SHAP-style node explainer and the AIM explanation metrics.
 *
 * Conventions:
 *  - Every fallible call returns an xgkn_status; XGKN_OK is 0.
 *  - On failure xgkn_last_error() holds a message for the calling thread.
 *  - Handles are opaque and owned by the caller; free them with the matching
 *    *_free function (passing NULL is allowed).
 *  - Strings returned through char** are heap-allocated by the library and
 *    must be released with xgkn_string_free.
 */
#ifndef XGKN_XGKN_H
#define XGKN_XGKN_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(XGKN_BUILDING_LIBRARY)
#define XGKN_API __declspec(dllexport)
#else
#define XGKN_API __declspec(dllimport)
#endif
#else
#define XGKN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum xgkn_status {
  XGKN_OK = 0,
  XGKN_ERR_INVALID_ARGUMENT = 1,
  XGKN_ERR_INVALID_NODE = 2,
  XGKN_ERR_EMPTY_SELECTION = 3,
  XGKN_ERR_INCOMPATIBLE_SETS = 4,
  XGKN_ERR_FEATURE_DIM = 5,
  XGKN_ERR_SHAPE = 6,
  XGKN_ERR_NUMERIC = 7,
  XGKN_ERR_STATE = 8,
  XGKN_ERR_STATISTICS = 9,
  XGKN_ERR_IO = 10,
  XGKN_ERR_FORMAT = 11,
  XGKN_ERR_SPLIT = 12,
  XGKN_ERR_CAPACITY = 13,
  XGKN_ERR_ANCHOR = 14,
  XGKN_ERR_TRAINING_DIVERGED = 15,
  XGKN_ERR_MISSING_GROUND_TRUTH = 16,
  XGKN_ERR_UNDEFINED_METRIC = 17,
  XGKN_ERR_ALIGNMENT = 18,
  XGKN_ERR_TRACE = 19,
  XGKN_ERR_INTERNAL = 100
} xgkn_status;

typedef struct xgkn_config xgkn_config;
typedef struct xgkn_dataset xgkn_dataset;
typedef struct xgkn_model xgkn_model;

typedef void (*xgkn_log_fn)(const char* message, void* user);

/* ---- library ---------------------------------------------------------- */

XGKN_API const char* xgkn_version(void);
XGKN_API const char* xgkn_status_name(xgkn_status status);
/* Message of the last failed call on this thread ("" if none). */
XGKN_API const char* xgkn_last_error(void);
XGKN_API void xgkn_string_free(char* s);
/* Progress messages from the pipeline commands; NULL disables. */
XGKN_API void xgkn_set_log(xgkn_log_fn fn, void* user);

/* ---- run configuration ------------------------------------------------ */

XGKN_API xgkn_status xgkn_config_default(xgkn_config** out);
XGKN_API xgkn_status xgkn_config_from_json(const char* json, xgkn_config** out);
XGKN_API xgkn_status xgkn_config_load(const char* path, xgkn_config** out);
/* Applies a JSON merge patch (RFC 7386) to the configuration. */
XGKN_API xgkn_status xgkn_config_patch(xgkn_config* cfg, const char* json_patch);
XGKN_API xgkn_status xgkn_config_validate(const xgkn_config* cfg);
XGKN_API xgkn_status xgkn_config_to_json(const xgkn_config* cfg, char** out_json);
XGKN_API xgkn_status xgkn_config_hash(const xgkn_config* cfg, char** out_hash);
XGKN_API void xgkn_config_free(xgkn_config* cfg);

/* ---- pipeline commands -------------------------------------------------
 * All artifacts live under the configuration's output directory. The
 * optional out_json receives a summary of what was produced. */

XGKN_API xgkn_status xgkn_prepare(const xgkn_config* cfg, char** out_json);
XGKN_API xgkn_status xgkn_train(const xgkn_config* cfg, char** out_json);
XGKN_API xgkn_status xgkn_explain(const xgkn_config* cfg, char** out_json);
/* compare_with: NULL, or a run directory / report.json to t-test against.
 * out_json receives the report. */
XGKN_API xgkn_status xgkn_evaluate(const xgkn_config* cfg, const char* compare_with, char** out_json);
/* Renders a saved report.json as "json", "csv", "radar" or "comparisons". */
XGKN_API xgkn_status xgkn_report_render(const char* report_path, const char* format, char** out_text);

/* ---- datasets ----------------------------------------------------------- */

/* kind: "ba2motifs" or "bamultishapes". */
XGKN_API xgkn_status xgkn_dataset_generate(const char* kind, size_t n_graphs, uint64_t seed, xgkn_dataset** out);
XGKN_API xgkn_status xgkn_dataset_load_tu(const char* directory, const char* name, xgkn_dataset** out);
XGKN_API size_t xgkn_dataset_size(const xgkn_dataset* ds);
XGKN_API xgkn_status xgkn_dataset_graph_info(const xgkn_dataset* ds, size_t graph, size_t* out_nodes,
                                             size_t* out_edges, int* out_label);
XGKN_API void xgkn_dataset_free(xgkn_dataset* ds);

/* ---- models --------------------------------------------------------------- */

XGKN_API xgkn_status xgkn_model_load(const char* checkpoint_path, xgkn_model** out);
XGKN_API size_t xgkn_model_num_concepts(const xgkn_model* model);
XGKN_API xgkn_status xgkn_model_predict(const xgkn_model* model, const xgkn_dataset* ds, size_t graph,
                                        int* out_class);
/* Mean concept scores over the listed graphs (all graphs when n_ids is 0);
 * out must hold xgkn_model_num_concepts values. */
XGKN_API xgkn_status xgkn_model_baseline(const xgkn_model* model, const xgkn_dataset* ds, const size_t* ids,
                                         size_t n_ids, double* out, size_t out_len);
/* One explanation record (JSON object with graph, importance, selected,
 * threshold) for graph `graph` at threshold p. */
XGKN_API xgkn_status xgkn_model_explain(const xgkn_model* model, const xgkn_dataset* ds, size_t graph,
                                        const double* baseline, size_t baseline_len, double p, char** out_json);
XGKN_API void xgkn_model_free(xgkn_model* model);

#ifdef __cplusplus
}
#endif

#endif
