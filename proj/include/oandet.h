/* Public C interface for the gated aerial-patch detector.
 *
 * Every function returns an oandet_status; 0 means success. On failure a
 * human-readable message is available from oandet_last_error() until the next
 * call on the same thread. Checkpoints are self-describing, so inference
 * entry points only need the checkpoint handle plus runtime parameters.
 */
#ifndef OANDET_H
#define OANDET_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define OANDET_API __declspec(dllexport)
#else
#define OANDET_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum oandet_status {
    OANDET_OK = 0,
    OANDET_ERR_INTERNAL = 1, /* unexpected failure */
    OANDET_ERR_IO = 2,       /* missing or malformed files */
    OANDET_ERR_CONFIG = 3,   /* config or argument validation */
    OANDET_ERR_NUMERIC = 4   /* non-finite values in training */
} oandet_status;

OANDET_API const char* oandet_version(void);

/* Message describing the most recent failure on this thread; never NULL. */
OANDET_API const char* oandet_last_error(void);

/* Generates a synthetic dataset into out_dir (images, annotations and a
 * manifest.json). config_json is the config document text. */
OANDET_API oandet_status oandet_synth(const char* config_json, const char* out_dir);

/* Trains a model on the manifest's scenes and writes a checkpoint. When
 * verbose is nonzero, per-epoch loss lines go to stderr. */
OANDET_API oandet_status oandet_train(const char* config_json, const char* manifest_path,
                                      const char* out_checkpoint, int verbose);

/* Opaque trained-model handle (weights + calibration statistics). */
typedef struct oandet_model oandet_model;

OANDET_API oandet_status oandet_model_open(const char* checkpoint_path,
                                           oandet_model** out_model);
OANDET_API void oandet_model_close(oandet_model* model);

OANDET_API oandet_status oandet_model_param_count(const oandet_model* model,
                                                  uint64_t* out_count);
OANDET_API oandet_status oandet_model_patch_size(const oandet_model* model,
                                                 int32_t* out_patch);
OANDET_API oandet_status oandet_model_checksum(const oandet_model* model,
                                               uint64_t* out_checksum);

/* Turns the checkpoint's rolling activation statistics into a gate threshold
 * and writes {"threshold", "k", "window", "m", "v"} to out_json. Pass k <= 0
 * to use the k stored in the checkpoint. out_threshold may be NULL. */
OANDET_API oandet_status oandet_calibrate(const oandet_model* model, double k,
                                          const char* out_json, double* out_threshold);

/* Reads the "threshold" field of a calibration JSON file. */
OANDET_API oandet_status oandet_load_threshold(const char* path, double* out_threshold);

/* Full pipeline on one scene image (binary PGM): tile, gate at `threshold`,
 * detect on surviving patches, merge. Writes the detection list to out_json.
 * annotation_path may be NULL; with it, the run summary gains a real gate
 * report. */
OANDET_API oandet_status oandet_infer(const oandet_model* model, const char* scene_pgm,
                                      const char* annotation_path, double threshold,
                                      const char* out_json);

/* Dataset-level timing/quality benchmark at one threshold. stub_cost_ms > 0
 * replaces the detection head with a fixed busy-wait per passed patch.
 * Writes {"threshold", "skip_ratio", "gate_precision", "gate_recall", "mAP",
 * "fps"} to out_json. */
OANDET_API oandet_status oandet_bench(const oandet_model* model, const char* manifest_path,
                                      double threshold, int workers, double stub_cost_ms,
                                      const char* out_json);

/* Benchmarks every threshold in the array and writes one CSV with header
 * threshold,skip_ratio,gate_precision,gate_recall,mAP,fps. */
OANDET_API oandet_status oandet_sweep(const oandet_model* model, const char* manifest_path,
                                      const double* thresholds, size_t num_thresholds,
                                      int workers, const char* out_csv);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* OANDET_H */
