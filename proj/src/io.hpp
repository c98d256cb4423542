#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "bayesian_calibration.hpp"
#include "binning_calibration.hpp"
#include "core_model.hpp"
#include "mot_eval.hpp"
#include "regression_calibration.hpp"
#include "scaling_calibration.hpp"
#include "tracking.hpp"

namespace ct::io {

// First line of every JSONL file; declares the coordinate convention so
// mixed-convention inputs are rejected up front.
struct DatasetHeader {
    double image_w = 1.0;
    double image_h = 1.0;
    std::string convention = "relative";  // "relative" or "pixel"
};

struct DetectionFile {
    DatasetHeader header;
    std::vector<Detection> detections;
};

struct GroundTruthFile {
    DatasetHeader header;
    std::vector<GroundTruthObject> objects;
};

struct TrackRecord {
    int frame_id = 0;
    std::int64_t track_id = 0;
    int label = 0;
    BoundingBox box;
    double existence = 0.0;
    std::array<double, 4> obs_variance{};
};

struct TrackFile {
    DatasetHeader header;
    std::vector<TrackRecord> records;
};

// Strict mode rejects unknown fields; otherwise they produce a warning on
// stderr. All readers throw std::runtime_error with a one-line diagnostic
// on malformed input.
DetectionFile read_detections(const std::string& path, bool strict = true);
GroundTruthFile read_ground_truth(const std::string& path, bool strict = true);
TrackFile read_tracks(const std::string& path, bool strict = true);

void write_detections(const std::string& path, const DetectionFile& file);
void write_ground_truth(const std::string& path, const GroundTruthFile& file);
void write_tracks(const std::string& path, const TrackFile& file);

// Writes via a temporary file in the same directory plus an atomic rename;
// a failed write never leaves a partial file behind.
void atomic_write(const std::string& path, const std::string& content);

// Detections and ground truth joined per frame (frame-id union).
std::vector<Frame> to_frames(const DetectionFile& detections,
                             const GroundTruthFile& ground_truth);

std::vector<MotBox> to_mot_boxes(const GroundTruthFile& ground_truth);
std::vector<MotBox> to_mot_boxes(const TrackFile& tracks);

// ---------------------------------------------------------------------------
// Model serialization: a JSON document with a "method" tag; loaders reject
// unknown tags.

struct ConfidenceCalibrator {
    std::optional<HistogramBinningModel> histogram;
    std::optional<ScalingModel> scaling;
    std::optional<VariationalPosterior> bayesian;

    // Bayesian models transform through the posterior-predictive mean.
    double transform(const CalibrationSample& sample, int bayes_samples = 200,
                     std::uint64_t seed = 0) const;
};

struct RegressionCalibrator {
    std::optional<IsotonicModel> isotonic;
    std::optional<VarianceScalingModel> variance_scaling;
    std::optional<GpCalibrator> gp;
    std::optional<CovarianceModel> covariance;

    // Calibrated observation covariance for the tracker (non-parametric
    // outputs are moment-matched to Gaussians).
    Eigen::Matrix4d observation_covariance(const Eigen::Vector4d& mean,
                                           const Eigen::Vector4d& var) const;
};

void save_confidence_model(const std::string& path, const ConfidenceCalibrator& model);
ConfidenceCalibrator load_confidence_model(const std::string& path);

void save_regression_model(const std::string& path, const RegressionCalibrator& model);
RegressionCalibrator load_regression_model(const std::string& path);

std::string feature_name(BoxFeature feature);
BoxFeature feature_from_name(const std::string& name);
std::string scaling_method_name(ScalingMethod method);
ScalingMethod scaling_method_from_name(const std::string& name);

}  // namespace ct::io
