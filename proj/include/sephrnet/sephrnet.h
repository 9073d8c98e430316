#ifndef SEPHRNET_SEPHRNET_H
#define SEPHRNET_SEPHRNET_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(SEPHR_BUILDING)
#    define SEPHR_API __declspec(dllexport)
#  else
#    define SEPHR_API __declspec(dllimport)
#  endif
#else
#  define SEPHR_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sephr_status {
    SEPHR_OK = 0,
    SEPHR_ERR_CONFIG = 1,
    SEPHR_ERR_USAGE = 2,
    SEPHR_ERR_DATA = 3,
    SEPHR_ERR_STATE = 4,
    SEPHR_ERR_DATASET_FORMAT = 5,
    SEPHR_ERR_CHECKPOINT_FORMAT = 6,
    SEPHR_ERR_IO = 7,
    SEPHR_ERR_DIVERGED = 8,
    SEPHR_ERR_UNKNOWN_PRESET = 9,
    SEPHR_ERR_NULL_ARGUMENT = 10,
    SEPHR_ERR_BUFFER_TOO_SMALL = 11,
    SEPHR_ERR_INTERNAL = 12
} sephr_status;

typedef enum sephr_metric {
    SEPHR_METRIC_ACCURACY = 0,
    SEPHR_METRIC_PRECISION = 1,
    SEPHR_METRIC_RECALL = 2,
    SEPHR_METRIC_F1 = 3,
    SEPHR_METRIC_MIOU = 4
} sephr_metric;

typedef enum sephr_mode {
    SEPHR_MODE_EVAL = 0,  /* batch norm uses stored statistics */
    SEPHR_MODE_TRAIN = 1  /* batch statistics, running averages updated */
} sephr_mode;

typedef struct sephr_config sephr_config;
typedef struct sephr_dataset sephr_dataset;
typedef struct sephr_model sephr_model;
typedef struct sephr_ensemble sephr_ensemble;
typedef struct sephr_metrics sephr_metrics;

/* Message of the last failing call on this thread; "" after success. */
SEPHR_API const char* sephr_last_error(void);
SEPHR_API const char* sephr_status_name(sephr_status status);
SEPHR_API const char* sephr_version(void);

/* Worker cap for batch-parallel kernels; 1 runs everything inline. */
SEPHR_API sephr_status sephr_set_threads(int threads);

/* Strings are copied into caller buffers. *length receives the full size
   including the terminator, also when the buffer is too small. */

/* Configuration: flat dotted keys, one `key = value` per line. */
SEPHR_API sephr_status sephr_config_create(sephr_config** out);
/* Built-in profiles: "desk", "full", "trend". */
SEPHR_API sephr_status sephr_config_preset(const char* profile, sephr_config** out);
SEPHR_API sephr_status sephr_config_load(const char* path, sephr_config** out);
SEPHR_API sephr_status sephr_config_parse(const char* text, sephr_config** out);
SEPHR_API sephr_status sephr_config_set(sephr_config* config, const char* key, const char* value);
SEPHR_API sephr_status sephr_config_merge(sephr_config* config, const sephr_config* overrides);
SEPHR_API sephr_status sephr_config_get(const sephr_config* config, const char* key, char* buffer, size_t capacity,
                                        size_t* length);
SEPHR_API sephr_status sephr_config_render(const sephr_config* config, char* buffer, size_t capacity,
                                           size_t* length);
/* Comma-separated keys that no operation has read so far. */
SEPHR_API sephr_status sephr_config_unread(const sephr_config* config, char* buffer, size_t capacity,
                                           size_t* length);
/* Fails with SEPHR_ERR_CONFIG naming the first key no profile defines. */
SEPHR_API sephr_status sephr_config_check(const sephr_config* config);
SEPHR_API sephr_status sephr_config_clone(const sephr_config* config, sephr_config** out);
SEPHR_API void sephr_config_free(sephr_config* config);

/* Datasets. Generation reads data.* keys (count, seed, frames, bands,
   height, width, classes, noise). */
SEPHR_API sephr_status sephr_dataset_generate(const sephr_config* config, sephr_dataset** out);
SEPHR_API sephr_status sephr_dataset_load(const char* path, sephr_dataset** out);
SEPHR_API sephr_status sephr_dataset_save(const sephr_dataset* dataset, const char* path);
SEPHR_API sephr_status sephr_dataset_size(const sephr_dataset* dataset, size_t* count);
/* Geometry of the first scene: frames, bands, height, width. */
SEPHR_API sephr_status sephr_dataset_geometry(const sephr_dataset* dataset, size_t* frames, size_t* bands,
                                              size_t* height, size_t* width);
SEPHR_API sephr_status sephr_dataset_labels(const sephr_dataset* dataset, size_t scene, int32_t* labels,
                                            size_t capacity);
SEPHR_API sephr_status sephr_dataset_scene_hash(const sephr_dataset* dataset, size_t scene, uint64_t* hash);
/* Seeded train/holdout partition of scene indices. Both arrays need room
   for every scene. */
SEPHR_API sephr_status sephr_dataset_split(const sephr_dataset* dataset, double train_fraction, uint64_t seed,
                                           size_t* train, size_t* n_train, size_t* holdout, size_t* n_holdout);
SEPHR_API void sephr_dataset_free(sephr_dataset* dataset);

/* Models. Creation reads model.*, encoder.*, attention.*, lstm.*,
   decoder.* and model.seed. */
SEPHR_API sephr_status sephr_model_create(const sephr_config* config, sephr_model** out);
SEPHR_API sephr_status sephr_model_load(const char* path, sephr_model** out);
SEPHR_API sephr_status sephr_model_save(const sephr_model* model, const char* path);
SEPHR_API sephr_status sephr_model_config(const sephr_model* model, sephr_config** out);
/* Training settings stored alongside a trained checkpoint (train.*). */
SEPHR_API sephr_status sephr_model_metadata(const sephr_model* model, sephr_config** out);
/* Closed-form encoder weights saved by the configured separable layers:
   (k^2 - 2k) * C^2 summed over the converted C -> C convolutions. */
SEPHR_API sephr_status sephr_separable_saving(const sephr_config* config, size_t* saving);
SEPHR_API sephr_status sephr_model_param_count(const sephr_model* model, size_t* total, size_t* encoder);
/* Forward pass. frames: batch x T x C x H x W raw values in row-major
   order (the model's band statistics are applied); logits: batch x K x H x W.
   A fresh model has no batch-norm statistics until a train-mode pass. */
SEPHR_API sephr_status sephr_model_forward(sephr_model* model, sephr_mode mode, const double* frames, size_t batch,
                                           size_t frames_per_scene, size_t bands, size_t height, size_t width,
                                           double* logits, size_t capacity);
/* Trains on a seeded split (train.fraction, train.seed) of the dataset.
   When out_dir is non-empty it receives train_log.csv, holdout_log.csv,
   best.ckpt and final.ckpt. */
SEPHR_API sephr_status sephr_model_train(sephr_model* model, const sephr_dataset* dataset,
                                         const sephr_config* config, const char* out_dir, int verbose);
/* Metrics over the given scene indices; labels (nullable) receives
   count x H x W predicted classes. */
SEPHR_API sephr_status sephr_model_evaluate(sephr_model* model, const sephr_dataset* dataset,
                                            const size_t* indices, size_t count, sephr_metrics** metrics,
                                            int32_t* labels, size_t capacity);
SEPHR_API void sephr_model_free(sephr_model* model);

/* AdaBoost ensembles. Training reads ensemble.* (members, theta,
   subset_fraction, seed) plus the model and train keys for the members,
   and boosts over the train.fraction split. out_dir receives member<m>.ckpt
   and ensemble.manifest. */
SEPHR_API sephr_status sephr_ensemble_train(const sephr_dataset* dataset, const sephr_config* config,
                                            const char* out_dir, int verbose, sephr_ensemble** out);
SEPHR_API sephr_status sephr_ensemble_load(const char* manifest, sephr_ensemble** out);
/* Training settings recorded in the manifest (train.*). */
SEPHR_API sephr_status sephr_ensemble_metadata(const sephr_ensemble* ensemble, sephr_config** out);
SEPHR_API sephr_status sephr_ensemble_size(const sephr_ensemble* ensemble, size_t* members);
SEPHR_API sephr_status sephr_ensemble_alpha(const sephr_ensemble* ensemble, size_t member, double* alpha);
/* Borrowed view of one member; valid while the ensemble lives. */
SEPHR_API sephr_status sephr_ensemble_member(sephr_ensemble* ensemble, size_t member, sephr_model** model);
SEPHR_API sephr_status sephr_ensemble_evaluate(sephr_ensemble* ensemble, const sephr_dataset* dataset,
                                               const size_t* indices, size_t count, sephr_metrics** metrics,
                                               int32_t* labels, size_t capacity);
SEPHR_API void sephr_ensemble_free(sephr_ensemble* ensemble);

/* Metrics. Class-level values use SEPHR_METRIC_PRECISION, _RECALL, _F1 and
   _MIOU (per-class IoU). */
SEPHR_API sephr_status sephr_metrics_value(const sephr_metrics* metrics, sephr_metric which, double* value);
SEPHR_API sephr_status sephr_metrics_class_value(const sephr_metrics* metrics, sephr_metric which, size_t cls,
                                                 double* value);
SEPHR_API sephr_status sephr_metrics_classes(const sephr_metrics* metrics, size_t* classes);
SEPHR_API sephr_status sephr_metrics_confusion(const sephr_metrics* metrics, size_t truth, size_t predicted,
                                               uint64_t* count);
SEPHR_API void sephr_metrics_free(sephr_metrics* metrics);

/* 8-bit paletted PNG with one colour per class. */
SEPHR_API sephr_status sephr_write_label_png(const char* path, const int32_t* labels, size_t height, size_t width,
                                             size_t classes);

#ifdef __cplusplus
}
#endif

#endif
