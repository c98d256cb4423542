#include "scaling_calibration.hpp"

#include <cmath>
#include <stdexcept>

#include "stats.hpp"

namespace ct {

namespace {

constexpr double kConfEps = 1e-6;

std::size_t tri_count(std::size_t k) { return k * (k + 1) / 2; }

// Lower-triangular matrix from packed parameters, diagonal through exp.
Eigen::MatrixXd unpack_lower(const Eigen::VectorXd& packed, std::size_t k, std::size_t offset) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(k, k);
    std::size_t p = offset;
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j <= i; ++j, ++p) {
            m(i, j) = (i == j) ? std::exp(packed[p]) : packed[p];
        }
    }
    return m;
}

// Accumulates dlr/dM into the packed gradient with the diagonal chain rule.
void pack_lower_grad(Eigen::VectorXd& grad, const Eigen::MatrixXd& dm,
                     const Eigen::MatrixXd& m, std::size_t offset) {
    std::size_t p = offset;
    const std::size_t k = static_cast<std::size_t>(m.rows());
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j <= i; ++j, ++p) {
            grad[p] += (i == j) ? dm(i, j) * m(i, j) : dm(i, j);
        }
    }
}

}  // namespace

bool scaling_method_is_dependent(ScalingMethod method) {
    return method == ScalingMethod::LogisticMvDep || method == ScalingMethod::BetaMvDep;
}

bool scaling_method_is_beta(ScalingMethod method) {
    return method == ScalingMethod::Beta || method == ScalingMethod::BetaMvIndep ||
           method == ScalingMethod::BetaMvDep;
}

Eigen::VectorXd scaling_feature_vector(ScalingMethod method, const FeatureSet& features,
                                       const CalibrationSample& sample) {
    Eigen::VectorXd v(features.size());
    for (std::size_t i = 0; i < features.size(); ++i) {
        double raw = feature_value(sample, features[i]);
        if (scaling_method_is_beta(method)) {
            v[i] = stats::clamp01(raw, kConfEps);
        } else {
            v[i] = (features[i] == BoxFeature::Confidence) ? stats::logit(raw, kConfEps) : raw;
        }
    }
    return v;
}

std::size_t scaling_param_count(ScalingMethod method, std::size_t k) {
    switch (method) {
        case ScalingMethod::Logistic: return 2;            // log w, delta
        case ScalingMethod::LogisticMvIndep: return k + 1; // w, delta
        case ScalingMethod::LogisticMvDep:
            return 2 * k + 2 * tri_count(k) + 1;           // mu+-, L^-1 factors, delta
        case ScalingMethod::Beta: return 3;                // log a, log b, c
        case ScalingMethod::BetaMvIndep: return 2 * k + 1; // log a_k, log b_k, delta
        case ScalingMethod::BetaMvDep:
            return 2 * (k + 1) + 2 * k + 1;                // log alpha+-, log lambda+-, delta
    }
    return 0;
}

Eigen::VectorXd scaling_init_params(ScalingMethod method, std::size_t k) {
    Eigen::VectorXd p = Eigen::VectorXd::Zero(scaling_param_count(method, k));
    switch (method) {
        case ScalingMethod::Logistic:
        case ScalingMethod::Beta:
            break;  // w = 1 resp. a = b = 1, bias 0: exact identity
        case ScalingMethod::LogisticMvIndep:
            p[0] = 1.0;  // w = e_1
            break;
        case ScalingMethod::BetaMvIndep: {
            // a_1 = b_1 = 1 on the confidence, near-zero elsewhere.
            const double off = std::log(1e-4);
            for (std::size_t i = 1; i < k; ++i) {
                p[i] = off;
                p[k + i] = off;
            }
            break;
        }
        case ScalingMethod::LogisticMvDep:
            // mu+- = 0, both inverse factors identity: lr = 0.
            break;
        case ScalingMethod::BetaMvDep:
            // alpha+- = lambda+- = 1: lr = 0.
            break;
    }
    return p;
}

double scaling_log_ratio(ScalingMethod method, std::size_t k, const Eigen::VectorXd& params,
                         const Eigen::VectorXd& s, Eigen::VectorXd* grad) {
    if (grad) grad->setZero(params.size());
    switch (method) {
        case ScalingMethod::Logistic: {
            double w = std::exp(params[0]);
            double lr = w * s[0] + params[1];
            if (grad) {
                (*grad)[0] = w * s[0];
                (*grad)[1] = 1.0;
            }
            return lr;
        }
        case ScalingMethod::LogisticMvIndep: {
            double lr = params.head(k).dot(s) + params[k];
            if (grad) {
                grad->head(k) = s;
                (*grad)[k] = 1.0;
            }
            return lr;
        }
        case ScalingMethod::LogisticMvDep: {
            const std::size_t t = tri_count(k);
            Eigen::VectorXd mu_pos = params.segment(0, k);
            Eigen::VectorXd mu_neg = params.segment(k, k);
            Eigen::MatrixXd m_pos = unpack_lower(params, k, 2 * k);
            Eigen::MatrixXd m_neg = unpack_lower(params, k, 2 * k + t);
            double delta = params[2 * k + 2 * t];

            Eigen::VectorXd vp = s - mu_pos;
            Eigen::VectorXd vn = s - mu_neg;
            Eigen::VectorXd mp = m_pos.transpose() * vp;  // Sigma^-1 = M M^T
            Eigen::VectorXd mn = m_neg.transpose() * vn;
            double lr = 0.5 * (mn.squaredNorm() - mp.squaredNorm()) + delta;
            if (grad) {
                grad->segment(0, k) = m_pos * mp;    // +A+ v+
                grad->segment(k, k) = -(m_neg * mn); // -A- v-
                pack_lower_grad(*grad, -(vp * mp.transpose()), m_pos, 2 * k);
                pack_lower_grad(*grad, vn * mn.transpose(), m_neg, 2 * k + t);
                (*grad)[2 * k + 2 * t] = 1.0;
            }
            return lr;
        }
        case ScalingMethod::Beta: {
            double a = std::exp(params[0]);
            double b = std::exp(params[1]);
            double u = std::log(s[0]);
            double t = -std::log(1.0 - s[0]);
            double lr = a * u + b * t + params[2];
            if (grad) {
                (*grad)[0] = a * u;
                (*grad)[1] = b * t;
                (*grad)[2] = 1.0;
            }
            return lr;
        }
        case ScalingMethod::BetaMvIndep: {
            double lr = params[2 * k];
            if (grad) (*grad)[2 * k] = 1.0;
            for (std::size_t i = 0; i < k; ++i) {
                double a = std::exp(params[i]);
                double b = std::exp(params[k + i]);
                double u = std::log(s[i]);
                double t = -std::log(1.0 - s[i]);
                lr += a * u + b * t;
                if (grad) {
                    (*grad)[i] = a * u;
                    (*grad)[k + i] = b * t;
                }
            }
            return lr;
        }
        case ScalingMethod::BetaMvDep: {
            // Parameters: log alpha+ (k+1), log alpha- (k+1), log lambda+ (k),
            // log lambda- (k), delta.
            const std::size_t oa_pos = 0, oa_neg = k + 1;
            const std::size_t ol_pos = 2 * (k + 1), ol_neg = ol_pos + k;
            const std::size_t od = ol_neg + k;
            double delta = params[od];

            double sum_a_pos = 0.0, sum_a_neg = 0.0;
            for (std::size_t i = 0; i <= k; ++i) {
                sum_a_pos += std::exp(params[oa_pos + i]);
                sum_a_neg += std::exp(params[oa_neg + i]);
            }
            double big_pos = 1.0, big_neg = 1.0;  // 1 + sum lambda_j s*_j
            Eigen::VectorXd sstar(k);
            for (std::size_t i = 0; i < k; ++i) {
                sstar[i] = s[i] / (1.0 - s[i]);
                big_pos += std::exp(params[ol_pos + i]) * sstar[i];
                big_neg += std::exp(params[ol_neg + i]) * sstar[i];
            }
            double log_big_pos = std::log(big_pos);
            double log_big_neg = std::log(big_neg);

            double lr = -sum_a_pos * log_big_pos + sum_a_neg * log_big_neg + delta;
            for (std::size_t i = 0; i < k; ++i) {
                double ap = std::exp(params[oa_pos + 1 + i]);
                double an = std::exp(params[oa_neg + 1 + i]);
                double x = std::log(sstar[i]);
                lr += ap * (params[ol_pos + i] + x) - an * (params[ol_neg + i] + x);
            }
            if (grad) {
                (*grad)[oa_pos] = -std::exp(params[oa_pos]) * log_big_pos;
                (*grad)[oa_neg] = std::exp(params[oa_neg]) * log_big_neg;
                for (std::size_t i = 0; i < k; ++i) {
                    double ap = std::exp(params[oa_pos + 1 + i]);
                    double an = std::exp(params[oa_neg + 1 + i]);
                    double lp = std::exp(params[ol_pos + i]);
                    double ln = std::exp(params[ol_neg + i]);
                    double x = std::log(sstar[i]);
                    (*grad)[oa_pos + 1 + i] = ap * (params[ol_pos + i] + x - log_big_pos);
                    (*grad)[oa_neg + 1 + i] = -an * (params[ol_neg + i] + x - log_big_neg);
                    (*grad)[ol_pos + i] = ap - sum_a_pos * lp * sstar[i] / big_pos;
                    (*grad)[ol_neg + i] = -an + sum_a_neg * ln * sstar[i] / big_neg;
                }
                (*grad)[od] = 1.0;
            }
            return lr;
        }
    }
    throw std::logic_error("unknown scaling method");
}

double ScalingModel::transform(const CalibrationSample& sample) const {
    Eigen::VectorXd s = scaling_feature_vector(method, features, sample);
    double lr = scaling_log_ratio(method, features.size(), params, s);
    return stats::clamp01(stats::sigmoid(lr), 1e-12);
}

double scaling_nll(ScalingMethod method, const FeatureSet& features,
                   const Eigen::VectorXd& params, const MatchedDataset& dataset) {
    double sum = 0.0;
    for (const CalibrationSample& sample : dataset.samples) {
        Eigen::VectorXd s = scaling_feature_vector(method, features, sample);
        double lr = scaling_log_ratio(method, features.size(), params, s);
        // -log sigmoid(lr) resp. -log(1 - sigmoid(lr)), numerically stable
        double soft = lr > 0.0 ? lr + std::log1p(std::exp(-lr)) : std::log1p(std::exp(lr));
        sum += sample.matched ? soft - lr : soft;
    }
    return sum / static_cast<double>(dataset.samples.size());
}

ScalingFitResult fit_scaling(ScalingMethod method, const MatchedDataset& dataset,
                             const FeatureSet& features, const OptimizerConfig& config) {
    const std::size_t n = dataset.samples.size();
    if (n == 0) throw std::invalid_argument("no samples");
    std::size_t pos = 0;
    for (const CalibrationSample& s : dataset.samples) pos += s.matched ? 1 : 0;
    if (pos == 0 || pos == n) throw std::invalid_argument("degenerate labels");
    const std::size_t k = features.size();
    if (scaling_method_is_dependent(method) && k < 2) {
        throw std::invalid_argument("dependent calibration requires >= 2 features");
    }

    // Inputs are fixed; precompute the feature matrix.
    std::vector<Eigen::VectorXd> inputs;
    inputs.reserve(n);
    std::vector<double> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        inputs.push_back(scaling_feature_vector(method, features, dataset.samples[i]));
        labels[i] = dataset.samples[i].matched ? 1.0 : 0.0;
    }

    auto eval = [&](const Eigen::VectorXd& params, Eigen::VectorXd* grad) {
        if (grad) grad->setZero(params.size());
        Eigen::VectorXd g_one(params.size());
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double lr = scaling_log_ratio(method, k, params, inputs[i], grad ? &g_one : nullptr);
            double soft = lr > 0.0 ? lr + std::log1p(std::exp(-lr)) : std::log1p(std::exp(lr));
            sum += labels[i] > 0.5 ? soft - lr : soft;
            if (grad) *grad += (stats::sigmoid(lr) - labels[i]) * g_one;
        }
        if (grad) *grad /= static_cast<double>(n);
        return sum / static_cast<double>(n);
    };

    Eigen::VectorXd params = scaling_init_params(method, k);
    Eigen::VectorXd grad(params.size());
    double loss = eval(params, &grad);
    const double initial_nll = loss;
    double step = config.initial_step;
    int iter = 0;
    for (; iter < config.max_iterations; ++iter) {
        Eigen::VectorXd candidate = params - step * grad;
        double cand_loss = eval(candidate, nullptr);
        if (cand_loss > loss) {
            step *= 0.5;
            if (step < 1e-14) break;
            continue;
        }
        double rel = (loss - cand_loss) / std::max(std::fabs(loss), 1e-12);
        params = candidate;
        loss = eval(params, &grad);
        step *= 1.1;
        if (rel < config.relative_tolerance) break;
    }

    ScalingFitResult result;
    result.model.method = method;
    result.model.features = features;
    result.model.params = params;
    result.initial_nll = initial_nll;
    result.final_nll = loss;
    result.iterations = iter;
    return result;
}

}  // namespace ct
