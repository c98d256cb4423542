#pragma once

#include <cstdint>
#include <vector>

#include "core_model.hpp"
#include "regression_metrics.hpp"

namespace ct {

// Configurable detector miscalibration used by the generators: a logistic
// link from reported confidence (plus an optional positional term) to the
// true match probability, a distortion of the reported box variances, and
// the residual noise family.
struct DetectorDistortion {
    double link_w = 1.0;       // slope on the confidence logit
    double link_delta = 0.0;   // bias on the logit
    double positional_weight = 0.0;  // adds weight * (cx - 0.5) to the logit

    // True residual std-dev = variance_scale * profile(mu) * reported
    // std-dev, so a fitted scaler should recover variance_scale.
    double variance_scale = 1.0;
    double variance_profile_amp = 0.0;  // profile(mu) = 1 + amp * sin(2 pi mu)

    enum class Noise { Gaussian, Cauchy };
    Noise noise = Noise::Gaussian;
    double reported_sigma = 0.02;  // reported per-dimension std-dev
    // Reported std-dev grows with the coordinate value: sigma_d =
    // reported_sigma * (1 + slope * mu_d). Lets the reported uncertainty
    // carry information about the input, as detector heads typically do.
    double reported_sigma_slope = 0.0;
};

double distortion_match_probability(const DetectorDistortion& distortion,
                                    double confidence, double cx);

MatchedDataset generate_detection_dataset(const DetectorDistortion& distortion,
                                          std::size_t n, std::uint64_t seed);

// Matched samples of a dataset as a regression problem (predicted box as
// the Gaussian mean, reported variances as the diagonal).
RegressionDataset to_regression(const MatchedDataset& dataset);

struct ScenarioConfig {
    int objects = 6;
    int frames = 60;
    double detection_probability = 0.95;
    double false_positives_per_frame = 0.0;
    double noise_sigma = 0.005;       // reported residual std-dev
    double tp_confidence_lo = 0.9;    // raw confidence range of true detections
    double tp_confidence_hi = 0.99;
    double fp_confidence_lo = 0.6;    // raw confidence range of false positives
    double fp_confidence_hi = 0.9;
    double jitter_sigma = 0.001;      // trajectory jitter
};

std::vector<Frame> generate_tracking_sequence(const ScenarioConfig& config,
                                              const DetectorDistortion& distortion,
                                              std::uint64_t seed);

}  // namespace ct
