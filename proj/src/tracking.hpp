#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "core_model.hpp"

namespace ct {

// Constant-acceleration model: state is [position/size (4), velocity (4),
// acceleration (4)].
inline constexpr int kStateDim = 12;
inline constexpr int kObsDim = 4;

struct KalmanConfig {
    double dt = 1.0;
    double process_noise = 1.0;  // white-noise acceleration intensity per axis
    double initial_velocity_var = 100.0;
    double initial_acceleration_var = 10.0;
    double default_observation_var = 4.0;  // when a detection carries no variances

    Eigen::Matrix<double, kStateDim, kStateDim> transition() const;
    Eigen::Matrix<double, kObsDim, kStateDim> observation() const;
    Eigen::Matrix<double, kStateDim, kStateDim> process_covariance() const;
};

struct ExistenceConfig {
    // The stationary point p_birth / (p_birth + 1 - p_stay) of the predict
    // step sits well below the drop threshold, so tracks that stop being
    // matched fade out instead of lingering at the report boundary.
    double p_stay = 0.95;    // P(m_t = 1 | m_{t-1} = 1)
    double p_birth = 0.001;  // P(m_t = 1 | m_{t-1} = 0)
    double precision_prior = 0.5;
    double drop_threshold = 0.3;
    double report_threshold = 0.5;
    double gate_quantile = 0.95;

    void validate() const;  // probabilities in range, prior strictly inside (0,1)
};

struct TrackState {
    std::int64_t id = 0;
    int label = 0;
    Eigen::Matrix<double, kStateDim, 1> x = Eigen::Matrix<double, kStateDim, 1>::Zero();
    Eigen::Matrix<double, kStateDim, kStateDim> p =
        Eigen::Matrix<double, kStateDim, kStateDim>::Identity();
    double existence = 0.0;
    int age = 0;
    int frames_since_update = 0;
};

void kalman_predict(TrackState* track, const KalmanConfig& config);
void kalman_update(TrackState* track, const Eigen::Vector4d& observation,
                   const Eigen::Matrix4d& lambda, const KalmanConfig& config);

double existence_predict(double existence, const ExistenceConfig& config);
double existence_update(double predicted, double confidence,
                        const ExistenceConfig& config);

double nis(const TrackState& track, const Eigen::Vector4d& observation,
           const Eigen::Matrix4d& lambda, const KalmanConfig& config);

struct Association {
    std::vector<std::pair<int, int>> pairs;  // (track index, detection index)
    std::vector<int> unmatched_tracks;
    std::vector<int> unmatched_detections;
};

// Hungarian assignment on a precomputed cost matrix with entries above the
// gate forbidden.
Association associate(const Eigen::MatrixXd& cost, double gate);

struct TrackOutput {
    int frame_id = 0;
    std::int64_t track_id = 0;
    int label = 0;
    BoundingBox box;
    double existence = 0.0;
    Eigen::Vector4d obs_variance = Eigen::Vector4d::Zero();  // diag of H P H^T
};

struct TrackerConfig {
    KalmanConfig kalman;
    ExistenceConfig existence;
};

// Optional per-detection calibration hooks applied before filtering: the
// confidence hook returns the calibrated match probability, the regression
// hook the (moment-matched) observation covariance.
using ConfidenceHook = std::function<double(const Detection&)>;
using RegressionHook = std::function<Eigen::Matrix4d(const Detection&)>;

class Tracker {
  public:
    explicit Tracker(TrackerConfig config);

    std::vector<TrackOutput> step(int frame_id, const std::vector<Detection>& detections,
                                  const ConfidenceHook& confidence_hook = nullptr,
                                  const RegressionHook& regression_hook = nullptr);

    const std::vector<TrackState>& tracks() const { return tracks_; }

  private:
    TrackerConfig config_;
    std::vector<TrackState> tracks_;
    std::int64_t next_id_ = 1;
};

}  // namespace ct
