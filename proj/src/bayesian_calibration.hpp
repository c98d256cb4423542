#pragma once

#include <cstdint>

#include "scaling_calibration.hpp"

namespace ct {

// Mean-field Gaussian posterior over the parameters of a scaling
// calibrator, learned by stochastic variational inference with the
// reparameterization trick.
struct VariationalPosterior {
    ScalingMethod method = ScalingMethod::Logistic;
    FeatureSet features{BoxFeature::Confidence};
    Eigen::VectorXd mean;
    Eigen::VectorXd log_std;
};

struct SviConfig {
    int epochs = 500;
    int mc_samples = 8;
    double step_size = 0.05;
    std::uint64_t seed = 0;
    double prior_scale_weights = 1.0;
    double prior_scale_bias = 10.0;
};

VariationalPosterior fit_svi(ScalingMethod method, const MatchedDataset& dataset,
                             const FeatureSet& features, const SviConfig& config);

struct PredictiveSample {
    std::vector<double> samples;  // T calibrated confidences
    double mean = 0.0;
};

// T posterior-predictive draws for one input; deterministic given seed.
PredictiveSample predict(const VariationalPosterior& posterior,
                         const CalibrationSample& sample, int t, std::uint64_t seed);

// Narrowest contiguous window of ceil(tau * T) sorted samples; ties go to
// the lowest start.
std::pair<double, double> hpdi(std::vector<double> samples, double tau);

// Per-sample ground truth is the empirical precision of the sample's
// uncalibrated-confidence bin; PICP is the fraction covered by the HPDI.
double picp(const MatchedDataset& dataset, const VariationalPosterior& posterior,
            double tau, int t, std::uint64_t seed, int bins_for_truth = 20);

double mpiw(const MatchedDataset& dataset, const VariationalPosterior& posterior,
            double tau, int t, std::uint64_t seed);

}  // namespace ct
