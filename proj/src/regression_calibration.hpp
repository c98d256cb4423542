#pragma once

#include <cstdint>

#include "regression_metrics.hpp"

namespace ct {

// A per-dimension calibrated output distribution: parametric (Gaussian or
// Cauchy) or a non-parametric CDF over discrete support points.
struct CalibratedDistribution {
    enum class Kind { Gaussian, Cauchy, Nonparametric };
    Kind kind = Kind::Gaussian;
    double mu = 0.0, var = 1.0;          // Gaussian
    double location = 0.0, scale = 1.0;  // Cauchy
    std::vector<double> support;         // Nonparametric, ascending
    std::vector<double> cdf;             // nondecreasing, [0,1] at the ends

    double quantile(double tau) const;
    double cdf_at(double r) const;
};

// Numerical-integration Gaussian fit to a non-parametric distribution.
std::pair<double, double> moment_match(const CalibratedDistribution& dist);

// ---------------------------------------------------------------------------
// Isotonic regression on CDF values (pool-adjacent-violators).

struct IsotonicModel {
    // Per-dimension monotone step function: value at x is y of the largest
    // breakpoint <= x, clamped at the ends.
    std::vector<std::vector<double>> breakpoints;
    std::vector<std::vector<double>> values;

    double map(int dim, double f) const;
};

IsotonicModel fit_isotonic(const RegressionDataset& dataset);
CalibratedDistribution transform_isotonic(const IsotonicModel& model, int dim,
                                          double mu, double var, int t = 512);

// ---------------------------------------------------------------------------
// Variance scaling (closed form).

struct VarianceScalingModel {
    Eigen::VectorXd w;  // per-dimension std-dev multiplier, > 0
};

VarianceScalingModel fit_variance_scaling(const RegressionDataset& dataset);

// ---------------------------------------------------------------------------
// GP-based input-dependent recalibration. Latent functions over the input
// distribution (mean, variance) carry a Gaussian-embedding RBF kernel; the
// latents are MAP-estimated on a subsample and predicted by the GP
// posterior mean.

enum class GpKind {
    Normal,    // per-dimension log std-dev scale, Gaussian output
    Cauchy,    // per-dimension log scale, Cauchy output
    Beta,      // per-dimension (log a, log b, c) link on the CDF
    NormalMv,  // joint input, one log-scale latent per dimension
};

struct GpModel {
    Eigen::MatrixXd train_mean;  // n x d_in
    Eigen::MatrixXd train_var;   // n x d_in
    Eigen::MatrixXd latents;     // n x q
    Eigen::MatrixXd alpha;       // K^{-1} latents, cached for prediction
    Eigen::MatrixXd coreg;       // q x q coregionalization, PSD
    double theta = 1.0;
    double jitter = 1e-6;

    Eigen::VectorXd predict(const Eigen::VectorXd& mean,
                            const Eigen::VectorXd& var) const;
};

struct GpCalibrator {
    GpKind kind = GpKind::Normal;
    std::vector<GpModel> models;  // one per dimension, or a single joint model
};

struct GpFitConfig {
    int max_points = 1024;
    int max_iterations = 150;
    double theta_init = 1.0;
    bool optimize_theta = true;
    double theta_log_lo = -3.0;
    double theta_log_hi = 3.0;
    int theta_iterations = 10;
    double jitter = 1e-6;
    int support_points = 512;
};

GpCalibrator fit_gp(GpKind kind, const RegressionDataset& dataset,
                    const GpFitConfig& config = {});

// Per-dimension calibrated distributions for one detection.
std::vector<CalibratedDistribution> transform_gp(const GpCalibrator& calibrator,
                                                 const Eigen::VectorXd& mean,
                                                 const Eigen::VectorXd& var,
                                                 int support_points = 512);

// ---------------------------------------------------------------------------
// Full-covariance estimation: marginal-correlation prior + GP rescaling of
// the LDL^T factors (off-diagonal L entries additively, D multiplicatively).

struct CovarianceModel {
    Eigen::MatrixXd corr;  // L x L residual correlation prior
    GpModel gp;            // joint-input GP over the factor adjustments
    bool has_gp = false;
};

CovarianceModel estimate_covariance(const RegressionDataset& dataset,
                                    const GpFitConfig& config = {});

Eigen::MatrixXd transform_covariance(const CovarianceModel& model,
                                     const Eigen::VectorXd& mean,
                                     const Eigen::VectorXd& var);

// Gaussian-embedding RBF kernel; exposed for tests.
double gp_kernel(const Eigen::VectorXd& mean_i, const Eigen::VectorXd& var_i,
                 const Eigen::VectorXd& mean_j, const Eigen::VectorXd& var_j,
                 double theta);

}  // namespace ct
