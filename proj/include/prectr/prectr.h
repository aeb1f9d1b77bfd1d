#ifndef PRECTR_PRECTR_H
#define PRECTR_PRECTR_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(PRECTR_BUILDING_LIBRARY)
#    define PRECTR_API __declspec(dllexport)
#  else
#    define PRECTR_API __declspec(dllimport)
#  endif
#else
#  define PRECTR_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Every function returns a status; details of the most recent failure on
 * the calling thread are available from prectr_last_error(). */
typedef enum prectr_status {
  PRECTR_OK = 0,
  PRECTR_ERR_INVALID_ARGUMENT = 1, /* null handle or pointer */
  PRECTR_ERR_DIMENSION = 2,
  PRECTR_ERR_INDEX = 3,
  PRECTR_ERR_GRAPH = 4,
  PRECTR_ERR_NUMERIC = 5,
  PRECTR_ERR_PRECONDITION = 6,
  PRECTR_ERR_VALIDATION = 7,
  PRECTR_ERR_DIVERGENCE = 8,
  PRECTR_ERR_LOOKUP = 9,
  PRECTR_ERR_TRAINING = 10,
  PRECTR_ERR_PARSE = 11,
  PRECTR_ERR_UNDEFINED_METRIC = 12,
  PRECTR_ERR_DEPENDENCY = 13,
  PRECTR_ERR_IO = 14,
  PRECTR_ERR_INTERNAL = 15
} prectr_status;

typedef struct prectr_config prectr_config;
typedef struct prectr_dataset prectr_dataset;
typedef struct prectr_encoder prectr_encoder;
typedef struct prectr_index prectr_index;
typedef struct prectr_model prectr_model;
typedef struct prectr_report prectr_report;
typedef struct prectr_ranking prectr_ranking;

PRECTR_API const char* prectr_last_error(void);
PRECTR_API const char* prectr_status_name(prectr_status status);
PRECTR_API const char* prectr_version(void);

/* Strings handed out by the library are released with this. */
PRECTR_API void prectr_string_free(char* s);

/* ---- configuration ---------------------------------------------------- */

PRECTR_API prectr_status prectr_config_new(prectr_config** out);
PRECTR_API void prectr_config_free(prectr_config* config);
/* key=value file, '#' comments; unknown keys are validation errors. */
PRECTR_API prectr_status prectr_config_load(prectr_config* config, const char* path);
PRECTR_API prectr_status prectr_config_set(prectr_config* config, const char* key, const char* value);
PRECTR_API prectr_status prectr_config_get(const prectr_config* config, const char* key, char** value);
PRECTR_API prectr_status prectr_config_validate(const prectr_config* config);
/* Every key in canonical order; loading it again reproduces the config. */
PRECTR_API prectr_status prectr_config_resolved(const prectr_config* config, char** text);

/* ---- datasets --------------------------------------------------------- */

/* Synthetic corpus; the handle also carries the ground-truth sidecar. */
PRECTR_API prectr_status prectr_dataset_generate(const prectr_config* config, prectr_dataset** out);
PRECTR_API prectr_status prectr_dataset_read(const char* path, prectr_dataset** out);
PRECTR_API prectr_status prectr_dataset_write(const prectr_dataset* dataset, const char* path);
/* Precondition error when the dataset has no ground truth. */
PRECTR_API prectr_status prectr_dataset_write_truth(const prectr_dataset* dataset, const char* path);
/* Sequential 78/11/11 split; truth, when present, is split alongside. */
PRECTR_API prectr_status prectr_dataset_split(const prectr_dataset* dataset, prectr_dataset** train,
                                              prectr_dataset** valid, prectr_dataset** test);
PRECTR_API prectr_status prectr_dataset_size(const prectr_dataset* dataset, size_t* size);
PRECTR_API void prectr_dataset_free(prectr_dataset* dataset);

/* ---- text encoder ----------------------------------------------------- */

/* Fresh encoder trained on click feedback of `train`. */
PRECTR_API prectr_status prectr_encoder_pretrain(const prectr_config* config, const prectr_dataset* train,
                                                 prectr_encoder** out, double* final_loss);
/* In place, on the relevance levels of `train`. */
PRECTR_API prectr_status prectr_encoder_finetune(const prectr_config* config, prectr_encoder* encoder,
                                                 const prectr_dataset* train, double* final_loss);
/* Missing files are dependency errors. */
PRECTR_API prectr_status prectr_encoder_read(const char* path, prectr_encoder** out);
PRECTR_API prectr_status prectr_encoder_write(const prectr_encoder* encoder, const char* path);
/* "pretrained" or "finetuned". */
PRECTR_API prectr_status prectr_encoder_stage(const prectr_encoder* encoder, char** stage);
PRECTR_API void prectr_encoder_free(prectr_encoder* encoder);

/* ---- embedding index -------------------------------------------------- */

/* Every query, item and (query, item) pair of the given datasets,
 * including their click histories. */
PRECTR_API prectr_status prectr_index_build(const prectr_encoder* encoder, const prectr_dataset* const* datasets,
                                            size_t n_datasets, prectr_index** out);
PRECTR_API prectr_status prectr_index_read(const char* path, prectr_index** out);
PRECTR_API prectr_status prectr_index_write(const prectr_index* index, const char* path);
/* Keys missing from the index are encoded on the fly by `encoder`, which
 * must outlive the index. Pass NULL to detach. */
PRECTR_API prectr_status prectr_index_set_fallback(prectr_index* index, const prectr_encoder* encoder);
PRECTR_API prectr_status prectr_index_size(const prectr_index* index, size_t* size);
PRECTR_API void prectr_index_free(prectr_index* index);

/* ---- model ------------------------------------------------------------ */

/* Two-stage training. The variant is taken from the train.* keys of the
 * config. `log_path` receives one line per batch; `dump_path` receives the
 * last batch if training diverges. Either may be NULL. */
PRECTR_API prectr_status prectr_model_train(const prectr_config* config, const prectr_dataset* train,
                                            const prectr_index* index, const char* log_path,
                                            const char* dump_path, prectr_model** out);
PRECTR_API prectr_status prectr_model_read(const char* path, prectr_model** out);
PRECTR_API prectr_status prectr_model_write(const prectr_model* model, const char* path);
PRECTR_API void prectr_model_free(prectr_model* model);

/* ---- evaluation ------------------------------------------------------- */

typedef enum prectr_metric {
  PRECTR_METRIC_AUC = 0,
  PRECTR_METRIC_GAUC = 1,
  PRECTR_METRIC_RELA_IMPR_AUC = 2,
  PRECTR_METRIC_RELA_IMPR_GAUC = 3,
  PRECTR_METRIC_RELEVANCE_SCORE = 4
} prectr_metric;

/* One row per model; relative improvements are against the first row. */
PRECTR_API prectr_status prectr_compare(const char* const* names, const prectr_model* const* models, size_t n,
                                        const prectr_dataset* test, const prectr_index* index,
                                        prectr_report** out);
PRECTR_API prectr_status prectr_report_rows(const prectr_report* report, size_t* rows);
PRECTR_API prectr_status prectr_report_metric(const prectr_report* report, size_t row, prectr_metric metric,
                                              double* value);
/* Human-readable table. */
PRECTR_API prectr_status prectr_report_table(const prectr_report* report, char** text);
/* "<name>.<metric>\t<value>" lines with round-trip precision. */
PRECTR_API prectr_status prectr_report_metrics(const prectr_report* report, char** text);
PRECTR_API void prectr_report_free(prectr_report* report);

/* ---- ranking ---------------------------------------------------------- */

typedef struct prectr_history_entry {
  const char* query;
  const char* item_text;
} prectr_history_entry;

typedef struct prectr_candidate {
  uint64_t item_id;
  const char* item_text;
} prectr_candidate;

/* Scores the candidates for one user and query and sorts them by final
 * score, descending; exact ties keep ascending item_id order. History is
 * most recent first, at most 50 entries. */
PRECTR_API prectr_status prectr_rank(const prectr_model* model, const prectr_index* index, uint64_t user_id,
                                     const char* query, const prectr_history_entry* history, size_t n_history,
                                     const prectr_candidate* candidates, size_t n_candidates,
                                     prectr_ranking** out);
PRECTR_API prectr_status prectr_ranking_size(const prectr_ranking* ranking, size_t* size);
/* Borrowed text, valid until the ranking is freed. */
PRECTR_API prectr_status prectr_ranking_item(const prectr_ranking* ranking, size_t position, uint64_t* item_id,
                                             const char** item_text, double* score);
/* final \t fused \t tau \t T1,T2,T3,T4 \t g1,g2,g3,g4 */
PRECTR_API prectr_status prectr_ranking_explain(const prectr_ranking* ranking, size_t position, char** line);
PRECTR_API void prectr_ranking_free(prectr_ranking* ranking);

#ifdef __cplusplus
}
#endif

#endif
