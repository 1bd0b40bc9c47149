/*
 * dualcnn C API.
 *
 * Every function returns a dcnn_status. On failure a one-line description is
 * available from dcnn_last_error() until the next API call on the same thread.
 * Objects are opaque handles owned by the caller and released with the
 * matching *_free function. Strings returned through char** are released with
 * dcnn_string_free.
 */
#ifndef DUALCNN_H
#define DUALCNN_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(DUALCNN_BUILDING_LIBRARY)
#    define DUALCNN_API __declspec(dllexport)
#  else
#    define DUALCNN_API __declspec(dllimport)
#  endif
#else
#  define DUALCNN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Values double as process exit codes for the command-line tool. */
typedef enum dcnn_status {
  DCNN_OK = 0,
  DCNN_ERR_VALIDATION = 1, /* bad arguments, config or shapes */
  DCNN_ERR_IO = 2,         /* unreadable/unwritable or corrupt files */
  DCNN_ERR_INTERNAL = 3    /* invariant violation, e.g. failed gradient check */
} dcnn_status;

typedef enum dcnn_task {
  DCNN_TASK_AUTO = -1, /* use the model's own task */
  DCNN_TASK_SUPER_RESOLUTION = 0,
  DCNN_TASK_FILTERING = 1,
  DCNN_TASK_DERAINING = 2,
  DCNN_TASK_DEHAZING = 3
} dcnn_task;

typedef enum dcnn_eval_source {
  DCNN_EVAL_MODEL = 0,  /* restore each pair's input with the model */
  DCNN_EVAL_INPUT = 1,  /* score the degraded input itself (baseline) */
  DCNN_EVAL_TARGET = 2  /* score the ground truth against itself (sanity) */
} dcnn_eval_source;

typedef struct dcnn_config dcnn_config;
typedef struct dcnn_model dcnn_model;
typedef struct dcnn_tensor dcnn_tensor;

DUALCNN_API const char* dcnn_version(void);
DUALCNN_API const char* dcnn_last_error(void);
DUALCNN_API void dcnn_string_free(char* s);

/* ---- run configuration ------------------------------------------------- */

DUALCNN_API dcnn_status dcnn_config_load(const char* path, dcnn_config** out);
DUALCNN_API dcnn_status dcnn_config_parse(const char* json_text, dcnn_config** out);
/* Reseeds both the data stream and the network initialization. */
DUALCNN_API dcnn_status dcnn_config_set_seed(dcnn_config* config, uint64_t seed);
/* Fully materialized JSON (all defaults written out). */
DUALCNN_API dcnn_status dcnn_config_to_json(const dcnn_config* config, char** json_text);
DUALCNN_API void dcnn_config_free(dcnn_config* config);

/* ---- commands ---------------------------------------------------------- */

/* Writes the configured patch stream as a pairs directory. out_dir may be NULL
 * to use the config's output.dataset. */
DUALCNN_API dcnn_status dcnn_synth_data(const dcnn_config* config, const char* out_dir,
                                        size_t* pair_count);

typedef void (*dcnn_log_fn)(uint64_t iteration, double total, double composition,
                            double structure, double detail, void* user);

/* Trains and writes the final checkpoint and the log. NULL paths fall back to
 * the config's output section. `on_entry` may be NULL. */
DUALCNN_API dcnn_status dcnn_train(const dcnn_config* config, const char* checkpoint_path,
                                   const char* log_path, dcnn_log_fn on_entry, void* user);

/* ---- models ------------------------------------------------------------ */

DUALCNN_API dcnn_status dcnn_model_load(const char* path, dcnn_model** out);
DUALCNN_API dcnn_status dcnn_model_save(const dcnn_model* model, const char* path);
/* Fresh He-initialized model described by a config (no training). */
DUALCNN_API dcnn_status dcnn_model_init(const dcnn_config* config, dcnn_model** out);
DUALCNN_API dcnn_status dcnn_model_task(const dcnn_model* model, dcnn_task* task);
/* Evaluation border: (largest kernel - 1) / 2. */
DUALCNN_API dcnn_status dcnn_model_border(const dcnn_model* model, size_t* border);
DUALCNN_API dcnn_status dcnn_model_parameter_count(const dcnn_model* model, size_t* net_s,
                                                   size_t* net_d);
DUALCNN_API void dcnn_model_free(dcnn_model* model);

/* ---- tensors ----------------------------------------------------------- */

/* `data` may be NULL for a zero tensor; otherwise c*h*w doubles, row-major. */
DUALCNN_API dcnn_status dcnn_tensor_create(size_t channels, size_t height, size_t width,
                                           const double* data, dcnn_tensor** out);
/* PGM (P5) or raw ".f64" sidecar, chosen by extension. */
DUALCNN_API dcnn_status dcnn_tensor_load(const char* path, dcnn_tensor** out);
/* Writes <stem>.pgm (value + display_offset, clipped) and the lossless <stem>.f64. */
DUALCNN_API dcnn_status dcnn_tensor_save(const dcnn_tensor* tensor, const char* stem,
                                         double display_offset);
DUALCNN_API dcnn_status dcnn_tensor_shape(const dcnn_tensor* tensor, size_t* channels,
                                          size_t* height, size_t* width);
DUALCNN_API const double* dcnn_tensor_data(const dcnn_tensor* tensor);
DUALCNN_API void dcnn_tensor_free(dcnn_tensor* tensor);

/* ---- inference and evaluation ----------------------------------------- */

/* Runs both branches and reconstructs with the task's formation model
 * (air-light with floor d0 for dehazing, S + D otherwise). Any of the three
 * outputs may be NULL. */
DUALCNN_API dcnn_status dcnn_infer(const dcnn_model* model, const dcnn_tensor* input,
                                   dcnn_task task, double d0, dcnn_tensor** structure,
                                   dcnn_tensor** detail, dcnn_tensor** output);

/* Scores every pair in `pairs_dir`. `model` may be NULL unless source is
 * DCNN_EVAL_MODEL. border < 0 picks the model's border (0 without a model).
 * report_path (nullable) receives the tab-separated report. */
DUALCNN_API dcnn_status dcnn_eval(const dcnn_model* model, const char* pairs_dir,
                                  dcnn_eval_source source, int64_t border,
                                  const char* report_path, double* mean_psnr,
                                  double* mean_ssim, size_t* rows);

DUALCNN_API dcnn_status dcnn_psnr(const dcnn_tensor* a, const dcnn_tensor* b, double peak,
                                  double* out);
DUALCNN_API dcnn_status dcnn_ssim(const dcnn_tensor* a, const dcnn_tensor* b, double* out);

/* ---- gradient check ---------------------------------------------------- */

typedef struct dcnn_gradcheck_options {
  size_t channels;  /* first hidden width of both tiny branches */
  size_t depth;     /* layers per branch */
  size_t patch;     /* square patch edge */
  uint64_t seed;
  double tolerance; /* max relative error */
  int corrupt;      /* non-zero: negative control with a perturbed gradient */
} dcnn_gradcheck_options;

DUALCNN_API void dcnn_gradcheck_defaults(dcnn_gradcheck_options* options);

/* Compares analytic end-to-end gradients of tiny dual nets (identity and
 * air-light formations, plus a cascade) against central finite differences.
 * Returns DCNN_ERR_INTERNAL when any block exceeds the tolerance; the report
 * is filled in either case. */
DUALCNN_API dcnn_status dcnn_gradcheck(const dcnn_gradcheck_options* options, char** report,
                                       double* max_rel_error);

#ifdef __cplusplus
}
#endif

#endif /* DUALCNN_H */
