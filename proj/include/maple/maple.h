/*
 * C interface to the MAPLE library.
 *
 * Objects are opaque handles created by the library and released with the
 * matching *_free function. Every fallible call returns a maple_status; on
 * failure maple_last_error() describes the problem (per thread, valid until
 * the next call into the library). Strings and arrays returned through out
 * parameters are owned by the caller and must be released with
 * maple_string_free / maple_doubles_free.
 *
 * Points are passed as text: either a JSON array of the p raw feature values
 * (original units; the model's standardization is applied) or a non-negative
 * integer naming a row of the model's training set.
 */
#ifndef MAPLE_MAPLE_H
#define MAPLE_MAPLE_H

#include <stddef.h>
#include <stdint.h>

#if defined(MAPLE_BUILDING_LIBRARY)
#define MAPLE_API __attribute__((visibility("default")))
#else
#define MAPLE_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum maple_status {
  MAPLE_OK = 0,
  MAPLE_ERR_INVALID_ARGUMENT = 1,
  MAPLE_ERR_IO = 2,
  MAPLE_ERR_PARSE = 3,
  MAPLE_ERR_SINGULAR = 4,
  MAPLE_ERR_RUNTIME = 5
} maple_status;

typedef struct maple_dataset maple_dataset;
typedef struct maple_model maple_model;

typedef struct maple_train_options {
  const char* ensemble;      /* "rf" or "gbrt" */
  size_t n_trees;
  size_t min_samples_leaf;
  size_t max_features;       /* 0: kind default */
  size_t max_depth;          /* 0: kind default */
  double learning_rate;
  double ridge;
  uint64_t seed;             /* split and ensemble seed */
  size_t threads;
  int causal_selection;      /* nonzero: choose d by the causal metric */
  double sigma;              /* causal selection neighbourhood */
  size_t draws;
} maple_train_options;

typedef struct maple_eval_overrides {
  const char* metric;        /* NULL keeps the protocol's metric */
  double sigma;              /* <= 0 keeps */
  size_t draws;              /* 0 keeps */
  size_t trials;             /* 0 keeps */
  int has_seed;
  uint64_t seed;
  size_t threads;            /* 0 means 1 */
} maple_eval_overrides;

MAPLE_API const char* maple_version(void);
MAPLE_API const char* maple_last_error(void);
MAPLE_API void maple_string_free(char* s);
MAPLE_API void maple_doubles_free(double* values);

MAPLE_API void maple_train_options_init(maple_train_options* options);
MAPLE_API void maple_eval_overrides_init(maple_eval_overrides* overrides);

/* Synthetic data: kind is "linear", "sil" or "step". Writes x1..xp,y. */
MAPLE_API maple_status maple_synth_csv(const char* kind, size_t n, size_t p, double noise, uint64_t seed,
                                       const char* path);

MAPLE_API maple_status maple_dataset_load_csv(const char* path, const char* target, maple_dataset** out);
MAPLE_API void maple_dataset_free(maple_dataset* ds);
MAPLE_API maple_status maple_dataset_shape(const maple_dataset* ds, size_t* rows, size_t* features);

/* One-column CSV (optional header) of black-box predictions. */
MAPLE_API maple_status maple_read_predictions_csv(const char* path, double** values, size_t* count);

/* Splits 50/25/25, standardizes on the training rows and fits. When
 * blackbox_predictions is non-NULL it must hold one value per dataset row. */
MAPLE_API maple_status maple_model_train(const maple_dataset* ds, const maple_train_options* options,
                                         const double* blackbox_predictions, size_t n_predictions, maple_model** out);
MAPLE_API void maple_model_free(maple_model* model);
MAPLE_API maple_status maple_model_save(const maple_model* model, const char* path);
MAPLE_API maple_status maple_model_load(const char* path, maple_model** out);
MAPLE_API maple_status maple_model_summary_json(const maple_model* model, char** out);
MAPLE_API maple_status maple_model_dimension(const maple_model* model, size_t* features, size_t* d);

/* Prediction in model (standardized) units. */
MAPLE_API maple_status maple_model_predict(const maple_model* model, const char* point, double* out);
/* {"predictions": [...]} for every row of ds, whose features must match the model's. */
MAPLE_API maple_status maple_model_predict_dataset_json(const maple_model* model, const maple_dataset* ds, char** out);
MAPLE_API maple_status maple_model_explain_json(const maple_model* model, const char* point, size_t top_k, char** out);

/* Grid diagnostic over the named feature; the remaining features are drawn
 * from the rows of `reference`. Returns the CSV table and a verdict line
 * ("pattern_detected score=..." or "none score=..."). */
MAPLE_API maple_status maple_model_diagnose(const maple_model* model, const maple_dataset* reference,
                                            const char* feature, size_t grid_points, size_t repeats, size_t k,
                                            uint64_t seed, char** csv_out, char** verdict_out);

/* exemplars_json: JSON array of points (arrays or row indices). */
MAPLE_API maple_status maple_model_choose_exemplar_json(const maple_model* model, const char* exemplars_json,
                                                        const char* point, double threshold, double margin,
                                                        char** out);

/* Evaluates a saved model on its held-out rows. */
MAPLE_API maple_status maple_eval_model_json(const maple_model* model, const char* metric, double sigma, size_t draws,
                                             size_t trials, uint64_t seed, char** report_json, char** markdown);
MAPLE_API maple_status maple_eval_protocol_json(const char* protocol_path, const maple_eval_overrides* overrides,
                                                char** report_json, char** markdown);

#ifdef __cplusplus
}
#endif

#endif /* MAPLE_MAPLE_H */
