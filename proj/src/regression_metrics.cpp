#include "regression_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "stats.hpp"

namespace ct {

std::size_t RegressionDataset::dims() const {
    return samples.empty() ? 0 : static_cast<std::size_t>(samples.front().mean.size());
}

void RegressionDataset::validate() const {
    if (samples.empty()) throw std::invalid_argument("no samples");
    const Eigen::Index l = samples.front().mean.size();
    for (const RegressionSample& s : samples) {
        if (s.mean.size() != l || s.var.size() != l || s.gt.size() != l)
            throw std::invalid_argument("inconsistent dimensions");
        for (Eigen::Index d = 0; d < l; ++d)
            if (!(s.var[d] > 0.0)) throw std::invalid_argument("non-positive variance");
    }
}

double gaussian_quantile(double mu, double sigma, double tau) {
    return mu + sigma * stats::normal_quantile(tau);
}

double chi2_quantile_of(int l, double tau) { return stats::chi2_quantile(l, tau); }

std::vector<double> tau_grid() {
    std::vector<double> grid;
    for (int i = 1; i <= 19; ++i) grid.push_back(0.05 * i);
    return grid;
}

namespace {

void check_dim(const RegressionDataset& dataset, int dim) {
    dataset.validate();
    if (dim < 0 || static_cast<std::size_t>(dim) >= dataset.dims())
        throw std::invalid_argument("dimension out of range");
}

}  // namespace

double pinball(const RegressionDataset& dataset, double tau, int dim) {
    check_dim(dataset, dim);
    double z = stats::normal_quantile(tau);
    double sum = 0.0;
    for (const RegressionSample& s : dataset.samples) {
        double q = s.mean[dim] + z * std::sqrt(s.var[dim]);
        double r = s.gt[dim];
        sum += r >= q ? tau * (r - q) : (1.0 - tau) * (q - r);
    }
    return sum / static_cast<double>(dataset.samples.size());
}

double pinball_mean(const RegressionDataset& dataset, int dim) {
    double sum = 0.0;
    std::vector<double> grid = tau_grid();
    for (double tau : grid) sum += pinball(dataset, tau, dim);
    return sum / static_cast<double>(grid.size());
}

double interval_picp(const RegressionDataset& dataset, double tau, int dim) {
    check_dim(dataset, dim);
    double z = stats::normal_quantile(0.5 * (1.0 + tau));
    std::size_t covered = 0;
    for (const RegressionSample& s : dataset.samples) {
        if (std::abs(s.gt[dim] - s.mean[dim]) <= z * std::sqrt(s.var[dim])) ++covered;
    }
    return static_cast<double>(covered) / static_cast<double>(dataset.samples.size());
}

double interval_mpiw(const RegressionDataset& dataset, double tau, int dim) {
    check_dim(dataset, dim);
    double z = stats::normal_quantile(0.5 * (1.0 + tau));
    double sum = 0.0;
    for (const RegressionSample& s : dataset.samples) sum += 2.0 * z * std::sqrt(s.var[dim]);
    return sum / static_cast<double>(dataset.samples.size());
}

double nees(const GaussianPrediction& pred) {
    Eigen::VectorXd residual = pred.gt - pred.mean;
    Eigen::LLT<Eigen::MatrixXd> llt(pred.cov);
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument("covariance not positive definite");
    return residual.dot(llt.solve(residual));
}

double nees_diagonal(const RegressionSample& sample) {
    double v = 0.0;
    for (Eigen::Index d = 0; d < sample.mean.size(); ++d) {
        double r = sample.gt[d] - sample.mean[d];
        v += r * r / sample.var[d];
    }
    return v;
}

double m_qce(const RegressionDataset& dataset, double tau) {
    dataset.validate();
    double radius = stats::chi2_quantile(static_cast<int>(dataset.dims()), tau);
    std::size_t inside = 0;
    for (const RegressionSample& s : dataset.samples)
        if (nees_diagonal(s) <= radius) ++inside;
    return std::abs(static_cast<double>(inside) /
                        static_cast<double>(dataset.samples.size()) -
                    tau);
}

double m_qce_mean(const RegressionDataset& dataset) {
    double sum = 0.0;
    std::vector<double> grid = tau_grid();
    for (double tau : grid) sum += m_qce(dataset, tau);
    return sum / static_cast<double>(grid.size());
}

double sgv(const Eigen::MatrixXd& cov) {
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument("covariance not positive definite");
    // det(Sigma) = prod diag(L)^2; take the L-th root in log space.
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < cov.rows(); ++i)
        log_det += 2.0 * std::log(llt.matrixL()(i, i));
    return std::exp(log_det / static_cast<double>(cov.rows()));
}

double c_qce(const RegressionDataset& dataset, double tau, int bins) {
    dataset.validate();
    if (bins < 1) throw std::invalid_argument("bins must be positive");
    const std::size_t n = dataset.samples.size();
    const double radius = stats::chi2_quantile(static_cast<int>(dataset.dims()), tau);

    std::vector<double> key(n);
    double key_max = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        key[i] = std::sqrt(std::pow(dataset.samples[i].var.prod(),
                                    1.0 / static_cast<double>(dataset.dims())));
        key_max = std::max(key_max, key[i]);
    }
    if (key_max <= 0.0) key_max = 1.0;

    std::vector<double> count(static_cast<std::size_t>(bins), 0.0);
    std::vector<double> inside(static_cast<std::size_t>(bins), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        int b = std::min(static_cast<int>(key[i] / key_max * bins), bins - 1);
        count[static_cast<std::size_t>(b)] += 1.0;
        if (nees_diagonal(dataset.samples[i]) <= radius)
            inside[static_cast<std::size_t>(b)] += 1.0;
    }
    double err = 0.0;
    for (int b = 0; b < bins; ++b) {
        std::size_t bi = static_cast<std::size_t>(b);
        if (count[bi] == 0.0) continue;
        err += count[bi] / static_cast<double>(n) *
               std::abs(inside[bi] / count[bi] - tau);
    }
    return err;
}

namespace {

// Shared binned-discrepancy core for UCE/ENCE: bins over `key`, compares a
// per-bin error statistic against a per-bin predicted statistic.
struct BinAgg {
    double count = 0.0;
    double sq_err = 0.0;
    double pred = 0.0;
};

std::vector<BinAgg> bin_by_key(const RegressionDataset& dataset, int dim, int bins,
                               bool use_std) {
    const std::size_t n = dataset.samples.size();
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    std::vector<double> key(n);
    for (std::size_t i = 0; i < n; ++i) {
        double v = dataset.samples[i].var[dim];
        key[i] = use_std ? std::sqrt(v) : v;
        lo = std::min(lo, key[i]);
        hi = std::max(hi, key[i]);
    }
    double span = hi - lo;
    if (span <= 0.0) span = 1.0;

    std::vector<BinAgg> agg(static_cast<std::size_t>(bins));
    for (std::size_t i = 0; i < n; ++i) {
        int b = std::min(static_cast<int>((key[i] - lo) / span * bins), bins - 1);
        BinAgg& a = agg[static_cast<std::size_t>(b)];
        double r = dataset.samples[i].gt[dim] - dataset.samples[i].mean[dim];
        a.count += 1.0;
        a.sq_err += r * r;
        a.pred += dataset.samples[i].var[dim];
    }
    return agg;
}

}  // namespace

double uce(const RegressionDataset& dataset, int dim, int bins) {
    check_dim(dataset, dim);
    if (bins < 1) throw std::invalid_argument("bins must be positive");
    std::vector<BinAgg> agg = bin_by_key(dataset, dim, bins, /*use_std=*/false);
    const double n = static_cast<double>(dataset.samples.size());
    double err = 0.0;
    for (const BinAgg& a : agg) {
        if (a.count == 0.0) continue;
        err += a.count / n * std::abs(a.sq_err / a.count - a.pred / a.count);
    }
    return err;
}

double ence(const RegressionDataset& dataset, int dim, int bins) {
    check_dim(dataset, dim);
    if (bins < 1) throw std::invalid_argument("bins must be positive");
    std::vector<BinAgg> agg = bin_by_key(dataset, dim, bins, /*use_std=*/true);
    double err = 0.0;
    int populated = 0;
    for (const BinAgg& a : agg) {
        if (a.count == 0.0) continue;
        double rmse = std::sqrt(a.sq_err / a.count);
        double rmv = std::sqrt(a.pred / a.count);
        err += std::abs(rmse - rmv) / rmv;
        ++populated;
    }
    if (populated == 0) throw std::invalid_argument("no populated bins");
    return err / static_cast<double>(populated);
}

double nll_gaussian(const RegressionDataset& dataset) {
    dataset.validate();
    double sum = 0.0;
    for (const RegressionSample& s : dataset.samples) {
        for (Eigen::Index d = 0; d < s.mean.size(); ++d) {
            double r = s.gt[d] - s.mean[d];
            sum += 0.5 * std::log(2.0 * stats::kPi * s.var[d]) +
                   0.5 * r * r / s.var[d];
        }
    }
    return sum / static_cast<double>(dataset.samples.size());
}

double nll_gaussian_full(const std::vector<GaussianPrediction>& preds) {
    if (preds.empty()) throw std::invalid_argument("no samples");
    double sum = 0.0;
    for (const GaussianPrediction& p : preds) {
        Eigen::LLT<Eigen::MatrixXd> llt(p.cov);
        if (llt.info() != Eigen::Success)
            throw std::invalid_argument("covariance not positive definite");
        Eigen::VectorXd r = p.gt - p.mean;
        double log_det = 0.0;
        for (Eigen::Index i = 0; i < p.cov.rows(); ++i)
            log_det += 2.0 * std::log(llt.matrixL()(i, i));
        sum += 0.5 * (static_cast<double>(p.cov.rows()) * std::log(2.0 * stats::kPi) +
                      log_det + r.dot(llt.solve(r)));
    }
    return sum / static_cast<double>(preds.size());
}

}  // namespace ct
