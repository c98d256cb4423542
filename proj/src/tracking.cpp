#include "tracking.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

#include "hungarian.hpp"
#include "stats.hpp"

namespace ct {

Eigen::Matrix<double, kStateDim, kStateDim> KalmanConfig::transition() const {
    Eigen::Matrix<double, kStateDim, kStateDim> f =
        Eigen::Matrix<double, kStateDim, kStateDim>::Identity();
    for (int d = 0; d < kObsDim; ++d) {
        f(d, d + 4) = dt;
        f(d, d + 8) = 0.5 * dt * dt;
        f(d + 4, d + 8) = dt;
    }
    return f;
}

Eigen::Matrix<double, kObsDim, kStateDim> KalmanConfig::observation() const {
    Eigen::Matrix<double, kObsDim, kStateDim> h =
        Eigen::Matrix<double, kObsDim, kStateDim>::Zero();
    for (int d = 0; d < kObsDim; ++d) h(d, d) = 1.0;
    return h;
}

Eigen::Matrix<double, kStateDim, kStateDim> KalmanConfig::process_covariance() const {
    Eigen::Matrix<double, kStateDim, kStateDim> psi =
        Eigen::Matrix<double, kStateDim, kStateDim>::Zero();
    // Discrete white-noise acceleration per axis: Psi = q * g g^T with
    // g = (dt^2/2, dt, 1).
    Eigen::Vector3d g(0.5 * dt * dt, dt, 1.0);
    for (int d = 0; d < kObsDim; ++d) {
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                psi(d + 4 * i, d + 4 * j) = process_noise * g[i] * g[j];
    }
    return psi;
}

void ExistenceConfig::validate() const {
    auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!in_unit(p_stay) || !in_unit(p_birth) || !in_unit(drop_threshold) ||
        !in_unit(report_threshold))
        throw std::invalid_argument("probability out of range");
    if (!(precision_prior > 0.0 && precision_prior < 1.0))
        throw std::invalid_argument("precision prior must be strictly inside (0,1)");
    if (!(gate_quantile > 0.0 && gate_quantile < 1.0))
        throw std::invalid_argument("gate quantile must be strictly inside (0,1)");
}

void kalman_predict(TrackState* track, const KalmanConfig& config) {
    auto f = config.transition();
    track->x = f * track->x;
    track->p = f * track->p * f.transpose() + config.process_covariance();
    track->p = 0.5 * (track->p + track->p.transpose());
}

void kalman_update(TrackState* track, const Eigen::Vector4d& observation,
                   const Eigen::Matrix4d& lambda, const KalmanConfig& config) {
    auto h = config.observation();
    Eigen::Vector4d innovation = observation - h * track->x;
    Eigen::Matrix4d s = h * track->p * h.transpose() + lambda;
    Eigen::LLT<Eigen::Matrix4d> llt(s);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("singular innovation covariance");
    Eigen::Matrix<double, kStateDim, kObsDim> gain =
        track->p * h.transpose() * llt.solve(Eigen::Matrix4d::Identity());
    track->x += gain * innovation;
    // Joseph form keeps P symmetric positive definite.
    Eigen::Matrix<double, kStateDim, kStateDim> ikh =
        Eigen::Matrix<double, kStateDim, kStateDim>::Identity() - gain * h;
    track->p = ikh * track->p * ikh.transpose() + gain * lambda * gain.transpose();
    track->p = 0.5 * (track->p + track->p.transpose());
}

double existence_predict(double existence, const ExistenceConfig& config) {
    return config.p_stay * existence + config.p_birth * (1.0 - existence);
}

double existence_update(double predicted, double confidence,
                        const ExistenceConfig& config) {
    double pi = config.precision_prior;
    double pos = confidence / pi * predicted;
    double neg = (1.0 - confidence) / (1.0 - pi) * (1.0 - predicted);
    if (pos + neg <= 0.0) return predicted;
    return pos / (pos + neg);
}

double nis(const TrackState& track, const Eigen::Vector4d& observation,
           const Eigen::Matrix4d& lambda, const KalmanConfig& config) {
    auto h = config.observation();
    Eigen::Vector4d innovation = observation - h * track.x;
    Eigen::Matrix4d s = h * track.p * h.transpose() + lambda;
    Eigen::LLT<Eigen::Matrix4d> llt(s);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("singular innovation covariance");
    return innovation.dot(llt.solve(innovation));
}

Association associate(const Eigen::MatrixXd& cost, double gate) {
    Eigen::MatrixXd gated = cost;
    for (Eigen::Index i = 0; i < gated.rows(); ++i)
        for (Eigen::Index j = 0; j < gated.cols(); ++j)
            if (gated(i, j) > gate) gated(i, j) = kForbiddenCost;

    std::vector<int> assignment = hungarian(gated);
    Association out;
    std::vector<char> det_used(static_cast<std::size_t>(cost.cols()), 0);
    for (int i = 0; i < static_cast<int>(assignment.size()); ++i) {
        int j = assignment[static_cast<std::size_t>(i)];
        if (j >= 0) {
            out.pairs.emplace_back(i, j);
            det_used[static_cast<std::size_t>(j)] = 1;
        } else {
            out.unmatched_tracks.push_back(i);
        }
    }
    for (int j = 0; j < static_cast<int>(cost.cols()); ++j)
        if (!det_used[static_cast<std::size_t>(j)]) out.unmatched_detections.push_back(j);
    return out;
}

Tracker::Tracker(TrackerConfig config) : config_(std::move(config)) {
    config_.existence.validate();
}

std::vector<TrackOutput> Tracker::step(int frame_id,
                                       const std::vector<Detection>& detections,
                                       const ConfidenceHook& confidence_hook,
                                       const RegressionHook& regression_hook) {
    const KalmanConfig& kf = config_.kalman;
    const ExistenceConfig& ex = config_.existence;

    // Calibrated confidence and observation covariance per detection.
    std::vector<double> conf(detections.size());
    std::vector<Eigen::Matrix4d> lambda(detections.size());
    for (std::size_t i = 0; i < detections.size(); ++i) {
        const Detection& det = detections[i];
        conf[i] = confidence_hook ? confidence_hook(det)
                                  : stats::clamp01(det.confidence);
        if (regression_hook) {
            lambda[i] = regression_hook(det);
        } else {
            Eigen::Vector4d diag =
                Eigen::Vector4d::Constant(kf.default_observation_var);
            if (det.box_variances) {
                for (int d = 0; d < kObsDim; ++d) diag[d] = (*det.box_variances)[d];
            }
            lambda[i] = diag.asDiagonal();
        }
    }

    std::vector<double> predicted_existence(tracks_.size());
    for (std::size_t t = 0; t < tracks_.size(); ++t) {
        kalman_predict(&tracks_[t], kf);
        predicted_existence[t] = existence_predict(tracks_[t].existence, ex);
        tracks_[t].existence = predicted_existence[t];
        ++tracks_[t].age;
        ++tracks_[t].frames_since_update;
    }

    const double gate = stats::chi2_quantile(kObsDim, ex.gate_quantile);

    // Per-label association: tracks never match detections of another class.
    std::map<int, std::pair<std::vector<int>, std::vector<int>>> by_label;
    for (std::size_t t = 0; t < tracks_.size(); ++t)
        by_label[tracks_[t].label].first.push_back(static_cast<int>(t));
    for (std::size_t i = 0; i < detections.size(); ++i)
        by_label[detections[i].label].second.push_back(static_cast<int>(i));

    std::vector<char> det_matched(detections.size(), 0);
    for (auto& [label, group] : by_label) {
        const std::vector<int>& track_idx = group.first;
        const std::vector<int>& det_idx = group.second;
        if (track_idx.empty() || det_idx.empty()) continue;

        Eigen::MatrixXd cost(static_cast<Eigen::Index>(track_idx.size()),
                             static_cast<Eigen::Index>(det_idx.size()));
        for (std::size_t a = 0; a < track_idx.size(); ++a) {
            for (std::size_t b = 0; b < det_idx.size(); ++b) {
                const Detection& det = detections[static_cast<std::size_t>(det_idx[b])];
                Eigen::Vector4d obs(det.box.cx, det.box.cy, det.box.w, det.box.h);
                cost(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
                    nis(tracks_[static_cast<std::size_t>(track_idx[a])], obs,
                        lambda[static_cast<std::size_t>(det_idx[b])], kf);
            }
        }
        Association assoc = associate(cost, gate);
        for (auto [a, b] : assoc.pairs) {
            int t = track_idx[static_cast<std::size_t>(a)];
            int i = det_idx[static_cast<std::size_t>(b)];
            const Detection& det = detections[static_cast<std::size_t>(i)];
            Eigen::Vector4d obs(det.box.cx, det.box.cy, det.box.w, det.box.h);
            TrackState& track = tracks_[static_cast<std::size_t>(t)];
            kalman_update(&track, obs, lambda[static_cast<std::size_t>(i)], kf);
            track.existence = existence_update(
                predicted_existence[static_cast<std::size_t>(t)],
                conf[static_cast<std::size_t>(i)], ex);
            track.frames_since_update = 0;
            det_matched[static_cast<std::size_t>(i)] = 1;
        }
    }

    // Unmatched detections spawn tracks with the calibrated confidence as
    // the initial existence belief.
    for (std::size_t i = 0; i < detections.size(); ++i) {
        if (det_matched[i]) continue;
        const Detection& det = detections[i];
        TrackState track;
        track.id = next_id_++;
        track.label = det.label;
        track.x.setZero();
        track.x[0] = det.box.cx;
        track.x[1] = det.box.cy;
        track.x[2] = det.box.w;
        track.x[3] = det.box.h;
        track.p.setZero();
        for (int d = 0; d < kObsDim; ++d) {
            track.p(d, d) = lambda[i](d, d);
            track.p(d + 4, d + 4) = kf.initial_velocity_var;
            track.p(d + 8, d + 8) = kf.initial_acceleration_var;
        }
        track.existence = conf[i];
        tracks_.push_back(std::move(track));
    }

    std::vector<TrackState> kept;
    kept.reserve(tracks_.size());
    for (TrackState& track : tracks_)
        if (track.existence >= ex.drop_threshold) kept.push_back(std::move(track));
    tracks_ = std::move(kept);

    std::vector<TrackOutput> emitted;
    auto h = kf.observation();
    for (const TrackState& track : tracks_) {
        if (track.existence < ex.report_threshold) continue;
        TrackOutput out;
        out.frame_id = frame_id;
        out.track_id = track.id;
        out.label = track.label;
        out.box = BoundingBox{track.x[0], track.x[1], track.x[2], track.x[3]};
        out.existence = track.existence;
        out.obs_variance = (h * track.p * h.transpose()).diagonal();
        emitted.push_back(out);
    }
    return emitted;
}

}  // namespace ct
