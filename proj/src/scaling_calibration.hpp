#pragma once

#include <Eigen/Dense>

#include "confidence_metrics.hpp"
#include "core_model.hpp"

namespace ct {

enum class ScalingMethod {
    Logistic,         // univariate Platt scaling on the logit
    LogisticMvIndep,  // linear log-likelihood ratio over (logit, box features)
    LogisticMvDep,    // two-Gaussian quadratic log-likelihood ratio
    Beta,             // univariate beta-link on the confidence
    BetaMvIndep,      // per-dimension beta links, shared bias
    BetaMvDep,        // Libby-Novick multivariate beta ratio
};

bool scaling_method_is_dependent(ScalingMethod method);
bool scaling_method_is_beta(ScalingMethod method);

// Maps a sample to the input space of the ratio: the confidence enters as
// a logit for the logistic family and raw (clamped to (0,1)) for the beta
// family; box features enter raw in [0,1].
Eigen::VectorXd scaling_feature_vector(ScalingMethod method, const FeatureSet& features,
                                       const CalibrationSample& sample);

std::size_t scaling_param_count(ScalingMethod method, std::size_t feature_dims);

// Identity-map initialization (near-identity where exact identity is not
// representable).
Eigen::VectorXd scaling_init_params(ScalingMethod method, std::size_t feature_dims);

// Log-likelihood ratio lr(s; theta) and optionally its gradient w.r.t. the
// unconstrained parameter vector. Calibrated confidence is sigmoid(lr).
double scaling_log_ratio(ScalingMethod method, std::size_t feature_dims,
                         const Eigen::VectorXd& params, const Eigen::VectorXd& input,
                         Eigen::VectorXd* grad = nullptr);

struct ScalingModel {
    ScalingMethod method = ScalingMethod::Logistic;
    FeatureSet features{BoxFeature::Confidence};
    Eigen::VectorXd params;

    double transform(const CalibrationSample& sample) const;
};

struct OptimizerConfig {
    int max_iterations = 2000;
    double relative_tolerance = 1e-7;
    double initial_step = 0.5;
};

struct ScalingFitResult {
    ScalingModel model;
    double initial_nll = 0.0;
    double final_nll = 0.0;
    int iterations = 0;
};

// Full-batch gradient descent on the Bernoulli NLL with adaptive step
// (halved on loss increase). Throws on single-class data; dependent
// variants additionally require at least two feature dimensions.
ScalingFitResult fit_scaling(ScalingMethod method, const MatchedDataset& dataset,
                             const FeatureSet& features,
                             const OptimizerConfig& config = {});

// Mean Bernoulli NLL of the ratio model over the dataset.
double scaling_nll(ScalingMethod method, const FeatureSet& features,
                   const Eigen::VectorXd& params, const MatchedDataset& dataset);

}  // namespace ct
