#ifndef CALIBTRACK_H
#define CALIBTRACK_H

/* C interface to the calibtrack library: confidence and spatial-uncertainty
 * calibration for probabilistic object detectors, plus calibrated
 * tracking-by-detection and MOT evaluation.
 *
 * All functions return CT_OK (0) on success or a negative error code; the
 * message for the most recent failure on the calling thread is available
 * via ct_last_error(). Strings returned through output parameters must be
 * released with ct_free_string(). Model handles are opaque and must be
 * released with their matching *_free function.
 */

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

enum {
    CT_OK = 0,
    CT_ERROR_INVALID_ARGUMENT = -1,
    CT_ERROR_IO = -2,
    CT_ERROR_NUMERIC = -3,
    CT_ERROR_INTERNAL = -4
};

const char* ct_version(void);

/* Message for the most recent error on this thread; empty string if none. */
const char* ct_last_error(void);

void ct_free_string(char* s);

/* --------------------------------------------------------------------- */
/* Opaque model handles                                                   */

typedef struct ct_conf_model ct_conf_model;
typedef struct ct_reg_model ct_reg_model;

int ct_conf_model_load(const char* path, ct_conf_model** out);
void ct_conf_model_free(ct_conf_model* model);

/* Calibrated confidence for one detection (box in the dataset's
 * coordinate convention, normalized to [0,1]). */
int ct_conf_model_transform(const ct_conf_model* model, double confidence,
                            double cx, double cy, double w, double h,
                            double* out);

int ct_reg_model_load(const char* path, ct_reg_model** out);
void ct_reg_model_free(ct_reg_model* model);

/* Calibrated 4x4 observation covariance (row-major, cx/cy/w/h) from the
 * predicted box and its reported per-dimension variances. */
int ct_reg_model_covariance(const ct_reg_model* model, const double mean[4],
                            const double var[4], double out[16]);

/* --------------------------------------------------------------------- */
/* Pipeline entry points. Configuration and options are JSON strings; the
 * file formats are line-delimited JSON with a header line. */

/* mode: "dataset" writes detections + ground truth sampled from a
 * configurable miscalibrated detector; "sequence" writes a multi-frame
 * tracking scenario. */
int ct_synth(const char* mode, const char* config_json, unsigned long long seed,
             const char* detections_out, const char* ground_truth_out);

int ct_calibrate_confidence(const char* options_json, const char* detections_path,
                            const char* ground_truth_path, const char* model_out);

int ct_calibrate_regression(const char* options_json, const char* detections_path,
                            const char* ground_truth_path, const char* model_out);

/* model_path may be NULL to evaluate the uncalibrated detections. The
 * report (metrics plus reliability-diagram data) is returned as JSON. */
int ct_eval_calibration(const char* options_json, const char* detections_path,
                        const char* ground_truth_path, const char* model_path,
                        char** report_json_out);

/* conf_model_path / reg_model_path may be NULL to track uncalibrated. */
int ct_track(const char* tracker_config_json, const char* detections_path,
             const char* conf_model_path, const char* reg_model_path,
             const char* tracks_out);

int ct_eval_mot(const char* tracks_path, const char* ground_truth_path,
                double iou_threshold, char** report_json_out);

#ifdef __cplusplus
}
#endif

#endif /* CALIBTRACK_H */
