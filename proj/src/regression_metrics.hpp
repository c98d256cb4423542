#pragma once

#include <Eigen/Dense>
#include <vector>

namespace ct {

// One matched detection: predicted per-dimension Gaussian (diagonal
// covariance) and the ground-truth box vector.
struct RegressionSample {
    Eigen::VectorXd mean;
    Eigen::VectorXd var;  // diagonal entries, all > 0
    Eigen::VectorXd gt;
};

struct RegressionDataset {
    std::vector<RegressionSample> samples;

    std::size_t dims() const;
    void validate() const;  // throws on empty / inconsistent / non-positive var
};

// Full-covariance prediction used by NEES and the covariance calibrator.
struct GaussianPrediction {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    Eigen::VectorXd gt;
};

double gaussian_quantile(double mu, double sigma, double tau);
double chi2_quantile_of(int l, double tau);

// The tau grid used by averaged quantile metrics: 0.05, 0.10, ..., 0.95.
std::vector<double> tau_grid();

// Asymmetric quantile loss at the predicted tau-quantile, one dimension.
double pinball(const RegressionDataset& dataset, double tau, int dim);
double pinball_mean(const RegressionDataset& dataset, int dim);

// Central interval mu +/- F^{-1}((1+tau)/2) * sigma, one dimension.
double interval_picp(const RegressionDataset& dataset, double tau, int dim);
double interval_mpiw(const RegressionDataset& dataset, double tau, int dim);

double nees(const GaussianPrediction& pred);
double nees_diagonal(const RegressionSample& sample);

double m_qce(const RegressionDataset& dataset, double tau);
double m_qce_mean(const RegressionDataset& dataset);

double sgv(const Eigen::MatrixXd& cov);

double c_qce(const RegressionDataset& dataset, double tau, int bins = 20);

double uce(const RegressionDataset& dataset, int dim, int bins = 20);
double ence(const RegressionDataset& dataset, int dim, int bins = 20);

// Mean negative log density; the diagonal form sums univariate terms.
double nll_gaussian(const RegressionDataset& dataset);
double nll_gaussian_full(const std::vector<GaussianPrediction>& preds);

}  // namespace ct
