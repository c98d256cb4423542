#include "bayesian_calibration.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rng.hpp"
#include "stats.hpp"

namespace ct {

namespace {

// KL(q || prior) for diagonal Gaussians, prior centered at zero.
double gaussian_kl(const Eigen::VectorXd& mean, const Eigen::VectorXd& log_std,
                   const Eigen::VectorXd& prior_scale, Eigen::VectorXd* grad_mean,
                   Eigen::VectorXd* grad_log_std) {
    double kl = 0.0;
    for (Eigen::Index i = 0; i < mean.size(); ++i) {
        double s2 = prior_scale[i] * prior_scale[i];
        double sigma = std::exp(log_std[i]);
        kl += std::log(prior_scale[i]) - log_std[i] +
              (sigma * sigma + mean[i] * mean[i]) / (2.0 * s2) - 0.5;
        if (grad_mean) (*grad_mean)[i] = mean[i] / s2;
        if (grad_log_std) (*grad_log_std)[i] = sigma * sigma / s2 - 1.0;
    }
    return kl;
}

}  // namespace

VariationalPosterior fit_svi(ScalingMethod method, const MatchedDataset& dataset,
                             const FeatureSet& features, const SviConfig& config) {
    if (dataset.samples.empty()) throw std::invalid_argument("no samples");

    const std::size_t dims = features.size();
    const std::size_t n_params = scaling_param_count(method, dims);
    const std::size_t n = dataset.samples.size();

    // Precompute feature vectors once.
    std::vector<Eigen::VectorXd> inputs;
    inputs.reserve(n);
    std::vector<double> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        inputs.push_back(scaling_feature_vector(method, features, dataset.samples[i]));
        labels[i] = dataset.samples[i].matched ? 1.0 : 0.0;
    }

    // Warm-start the mean at the point estimate.
    ScalingFitResult map = fit_scaling(method, dataset, features);

    VariationalPosterior post;
    post.method = method;
    post.features = features;
    post.mean = map.model.params;
    post.log_std = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n_params), -2.0);

    Eigen::VectorXd prior_scale =
        Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n_params),
                                  config.prior_scale_weights);
    prior_scale[prior_scale.size() - 1] = config.prior_scale_bias;

    Rng rng(config.seed, 0x511bULL);

    // Adam on the negative ELBO.
    Eigen::VectorXd m_mean = Eigen::VectorXd::Zero(post.mean.size());
    Eigen::VectorXd v_mean = Eigen::VectorXd::Zero(post.mean.size());
    Eigen::VectorXd m_ls = Eigen::VectorXd::Zero(post.mean.size());
    Eigen::VectorXd v_ls = Eigen::VectorXd::Zero(post.mean.size());
    const double b1 = 0.9, b2 = 0.999, adam_eps = 1e-8;

    Eigen::VectorXd grad_theta(post.mean.size());
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        Eigen::VectorXd g_mean = Eigen::VectorXd::Zero(post.mean.size());
        Eigen::VectorXd g_ls = Eigen::VectorXd::Zero(post.mean.size());

        for (int s = 0; s < config.mc_samples; ++s) {
            Eigen::VectorXd eps(post.mean.size());
            for (Eigen::Index i = 0; i < eps.size(); ++i) eps[i] = rng.normal();
            Eigen::VectorXd sigma = post.log_std.array().exp();
            Eigen::VectorXd theta = post.mean + sigma.cwiseProduct(eps);

            for (std::size_t i = 0; i < n; ++i) {
                double lr = scaling_log_ratio(method, dims, theta, inputs[i], &grad_theta);
                double g = stats::sigmoid(lr);
                double d_nll = g - labels[i];  // d(-loglik)/d(lr)
                g_mean += d_nll * grad_theta;
                g_ls += d_nll * grad_theta.cwiseProduct(sigma).cwiseProduct(eps);
            }
        }
        g_mean /= static_cast<double>(config.mc_samples);
        g_ls /= static_cast<double>(config.mc_samples);

        Eigen::VectorXd kl_mean(post.mean.size()), kl_ls(post.mean.size());
        gaussian_kl(post.mean, post.log_std, prior_scale, &kl_mean, &kl_ls);
        g_mean += kl_mean;
        g_ls += kl_ls;

        double corr1 = 1.0 - std::pow(b1, epoch);
        double corr2 = 1.0 - std::pow(b2, epoch);
        for (Eigen::Index i = 0; i < post.mean.size(); ++i) {
            m_mean[i] = b1 * m_mean[i] + (1.0 - b1) * g_mean[i];
            v_mean[i] = b2 * v_mean[i] + (1.0 - b2) * g_mean[i] * g_mean[i];
            post.mean[i] -= config.step_size * (m_mean[i] / corr1) /
                            (std::sqrt(v_mean[i] / corr2) + adam_eps);
            m_ls[i] = b1 * m_ls[i] + (1.0 - b1) * g_ls[i];
            v_ls[i] = b2 * v_ls[i] + (1.0 - b2) * g_ls[i] * g_ls[i];
            post.log_std[i] -= config.step_size * (m_ls[i] / corr1) /
                               (std::sqrt(v_ls[i] / corr2) + adam_eps);
        }
    }
    return post;
}

PredictiveSample predict(const VariationalPosterior& posterior,
                         const CalibrationSample& sample, int t, std::uint64_t seed) {
    if (t <= 0) throw std::invalid_argument("sample count must be positive");
    const std::size_t dims = posterior.features.size();
    Eigen::VectorXd input =
        scaling_feature_vector(posterior.method, posterior.features, sample);
    Eigen::VectorXd sigma = posterior.log_std.array().exp();

    Rng rng(seed, 0x9d1cULL);
    PredictiveSample out;
    out.samples.reserve(static_cast<std::size_t>(t));
    double sum = 0.0;
    for (int k = 0; k < t; ++k) {
        Eigen::VectorXd theta = posterior.mean;
        for (Eigen::Index i = 0; i < theta.size(); ++i) theta[i] += sigma[i] * rng.normal();
        double g = stats::sigmoid(
            scaling_log_ratio(posterior.method, dims, theta, input));
        out.samples.push_back(g);
        sum += g;
    }
    out.mean = sum / static_cast<double>(t);
    return out;
}

std::pair<double, double> hpdi(std::vector<double> samples, double tau) {
    if (samples.empty()) throw std::invalid_argument("no samples");
    if (tau <= 0.0 || tau > 1.0) throw std::invalid_argument("tau out of range");
    std::sort(samples.begin(), samples.end());
    const std::size_t n = samples.size();
    std::size_t k = static_cast<std::size_t>(
        std::ceil(tau * static_cast<double>(n) - 1e-12));
    k = std::min(std::max<std::size_t>(k, 1), n);

    std::size_t best = 0;
    double best_width = samples[k - 1] - samples[0];
    for (std::size_t i = 1; i + k <= n; ++i) {
        double width = samples[i + k - 1] - samples[i];
        if (width < best_width) {
            best_width = width;
            best = i;
        }
    }
    return {samples[best], samples[best + k - 1]};
}

namespace {

// Empirical precision of each uncalibrated-confidence bin, used as the
// per-sample target when scoring predictive intervals.
std::vector<double> bin_truth(const MatchedDataset& dataset, int bins,
                              std::vector<int>* bin_of_sample) {
    std::vector<double> count(static_cast<std::size_t>(bins), 0.0);
    std::vector<double> pos(static_cast<std::size_t>(bins), 0.0);
    bin_of_sample->resize(dataset.samples.size());
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
        double c = stats::clamp01(dataset.samples[i].confidence);
        int b = std::min(static_cast<int>(c * bins), bins - 1);
        (*bin_of_sample)[i] = b;
        count[static_cast<std::size_t>(b)] += 1.0;
        if (dataset.samples[i].matched) pos[static_cast<std::size_t>(b)] += 1.0;
    }
    std::vector<double> truth(static_cast<std::size_t>(bins), 0.0);
    for (int b = 0; b < bins; ++b) {
        if (count[static_cast<std::size_t>(b)] > 0.0)
            truth[static_cast<std::size_t>(b)] =
                pos[static_cast<std::size_t>(b)] / count[static_cast<std::size_t>(b)];
    }
    return truth;
}

}  // namespace

double picp(const MatchedDataset& dataset, const VariationalPosterior& posterior,
            double tau, int t, std::uint64_t seed, int bins_for_truth) {
    if (dataset.samples.empty()) throw std::invalid_argument("no samples");
    std::vector<int> bin_of_sample;
    std::vector<double> truth = bin_truth(dataset, bins_for_truth, &bin_of_sample);

    std::size_t covered = 0;
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
        PredictiveSample pred = predict(posterior, dataset.samples[i], t, seed + i);
        auto [lo, hi] = hpdi(pred.samples, tau);
        double target = truth[static_cast<std::size_t>(bin_of_sample[i])];
        if (target >= lo && target <= hi) ++covered;
    }
    return static_cast<double>(covered) / static_cast<double>(dataset.samples.size());
}

double mpiw(const MatchedDataset& dataset, const VariationalPosterior& posterior,
            double tau, int t, std::uint64_t seed) {
    if (dataset.samples.empty()) throw std::invalid_argument("no samples");
    double sum = 0.0;
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
        PredictiveSample pred = predict(posterior, dataset.samples[i], t, seed + i);
        auto [lo, hi] = hpdi(pred.samples, tau);
        sum += hi - lo;
    }
    return sum / static_cast<double>(dataset.samples.size());
}

}  // namespace ct
