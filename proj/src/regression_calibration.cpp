#include "regression_calibration.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "stats.hpp"

namespace ct {

// ---------------------------------------------------------------------------
// CalibratedDistribution

double CalibratedDistribution::quantile(double tau) const {
    if (tau <= 0.0 || tau >= 1.0) throw std::invalid_argument("tau out of range");
    switch (kind) {
        case Kind::Gaussian:
            return mu + std::sqrt(var) * stats::normal_quantile(tau);
        case Kind::Cauchy:
            return location + scale * std::tan(stats::kPi * (tau - 0.5));
        case Kind::Nonparametric: {
            auto it = std::lower_bound(cdf.begin(), cdf.end(), tau);
            if (it == cdf.begin()) return support.front();
            if (it == cdf.end()) return support.back();
            std::size_t j = static_cast<std::size_t>(it - cdf.begin());
            double c0 = cdf[j - 1], c1 = cdf[j];
            double t = c1 > c0 ? (tau - c0) / (c1 - c0) : 0.0;
            return support[j - 1] + t * (support[j] - support[j - 1]);
        }
    }
    throw std::logic_error("unreachable");
}

double CalibratedDistribution::cdf_at(double r) const {
    switch (kind) {
        case Kind::Gaussian:
            return stats::normal_cdf((r - mu) / std::sqrt(var));
        case Kind::Cauchy:
            return 0.5 + std::atan((r - location) / scale) / stats::kPi;
        case Kind::Nonparametric: {
            auto it = std::lower_bound(support.begin(), support.end(), r);
            if (it == support.begin()) return 0.0;
            if (it == support.end()) return 1.0;
            std::size_t j = static_cast<std::size_t>(it - support.begin());
            double s0 = support[j - 1], s1 = support[j];
            double t = s1 > s0 ? (r - s0) / (s1 - s0) : 0.0;
            return cdf[j - 1] + t * (cdf[j] - cdf[j - 1]);
        }
    }
    throw std::logic_error("unreachable");
}

std::pair<double, double> moment_match(const CalibratedDistribution& dist) {
    if (dist.kind == CalibratedDistribution::Kind::Gaussian)
        return {dist.mu, dist.var};
    if (dist.kind == CalibratedDistribution::Kind::Cauchy)
        throw std::invalid_argument("Cauchy has no finite moments");
    double mean = 0.0, second = 0.0;
    for (std::size_t i = 1; i < dist.support.size(); ++i) {
        double dp = dist.cdf[i] - dist.cdf[i - 1];
        double mid = 0.5 * (dist.support[i] + dist.support[i - 1]);
        mean += dp * mid;
        second += dp * mid * mid;
    }
    double var = std::max(second - mean * mean, 0.0);
    return {mean, var};
}

// ---------------------------------------------------------------------------
// Isotonic regression

namespace {

// Weighted pool-adjacent-violators on pairs sorted by x.
void pav(const std::vector<double>& x, const std::vector<double>& y,
         std::vector<double>* bx, std::vector<double>* by) {
    struct Block {
        double x0, sum, weight;
    };
    std::vector<Block> blocks;
    blocks.reserve(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        blocks.push_back({x[i], y[i], 1.0});
        while (blocks.size() >= 2) {
            Block& b = blocks[blocks.size() - 1];
            Block& a = blocks[blocks.size() - 2];
            if (a.sum / a.weight <= b.sum / b.weight) break;
            a.sum += b.sum;
            a.weight += b.weight;
            blocks.pop_back();
        }
    }
    bx->clear();
    by->clear();
    for (const Block& b : blocks) {
        bx->push_back(b.x0);
        by->push_back(b.sum / b.weight);
    }
}

}  // namespace

IsotonicModel fit_isotonic(const RegressionDataset& dataset) {
    dataset.validate();
    const std::size_t n = dataset.samples.size();
    if (n < 2) throw std::invalid_argument("need at least two samples");
    const std::size_t l = dataset.dims();

    IsotonicModel model;
    model.breakpoints.resize(l);
    model.values.resize(l);
    for (std::size_t d = 0; d < l; ++d) {
        std::vector<double> c(n);
        for (std::size_t i = 0; i < n; ++i) {
            const RegressionSample& s = dataset.samples[i];
            c[i] = stats::normal_cdf(
                (s.gt[static_cast<Eigen::Index>(d)] - s.mean[static_cast<Eigen::Index>(d)]) /
                std::sqrt(s.var[static_cast<Eigen::Index>(d)]));
        }
        std::vector<double> sorted = c;
        std::sort(sorted.begin(), sorted.end());
        // Target for each CDF value is the empirical CDF of those values.
        std::vector<double> target(n);
        for (std::size_t k = 0; k < n; ++k)
            target[k] = static_cast<double>(k + 1) / static_cast<double>(n);
        pav(sorted, target, &model.breakpoints[d], &model.values[d]);
    }
    return model;
}

double IsotonicModel::map(int dim, double f) const {
    const std::vector<double>& bx = breakpoints[static_cast<std::size_t>(dim)];
    const std::vector<double>& by = values[static_cast<std::size_t>(dim)];
    auto it = std::upper_bound(bx.begin(), bx.end(), f);
    if (it == bx.begin()) return 0.0;  // below every training CDF value
    return by[static_cast<std::size_t>(it - bx.begin()) - 1];
}

CalibratedDistribution transform_isotonic(const IsotonicModel& model, int dim,
                                          double mu, double var, int t) {
    if (t < 3) throw std::invalid_argument("support too small");
    double sigma = std::sqrt(var);
    CalibratedDistribution out;
    out.kind = CalibratedDistribution::Kind::Nonparametric;
    out.support.resize(static_cast<std::size_t>(t));
    out.cdf.resize(static_cast<std::size_t>(t));
    for (int i = 0; i < t; ++i) {
        double z = -8.0 + 16.0 * static_cast<double>(i) / static_cast<double>(t - 1);
        out.support[static_cast<std::size_t>(i)] = mu + z * sigma;
        out.cdf[static_cast<std::size_t>(i)] =
            model.map(dim, stats::normal_cdf(z));
    }
    double lo = out.cdf.front(), hi = out.cdf.back();
    if (hi > lo) {
        for (double& c : out.cdf) c = (c - lo) / (hi - lo);
    } else {
        for (int i = 0; i < t; ++i)
            out.cdf[static_cast<std::size_t>(i)] =
                static_cast<double>(i) / static_cast<double>(t - 1);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Variance scaling

VarianceScalingModel fit_variance_scaling(const RegressionDataset& dataset) {
    dataset.validate();
    const std::size_t l = dataset.dims();
    VarianceScalingModel model;
    model.w.resize(static_cast<Eigen::Index>(l));
    for (std::size_t d = 0; d < l; ++d) {
        Eigen::Index di = static_cast<Eigen::Index>(d);
        double sum = 0.0;
        for (const RegressionSample& s : dataset.samples) {
            double r = s.gt[di] - s.mean[di];
            sum += r * r / s.var[di];
        }
        model.w[di] = std::sqrt(sum / static_cast<double>(dataset.samples.size()));
    }
    return model;
}

// ---------------------------------------------------------------------------
// GP machinery

double gp_kernel(const Eigen::VectorXd& mean_i, const Eigen::VectorXd& var_i,
                 const Eigen::VectorXd& mean_j, const Eigen::VectorXd& var_j,
                 double theta) {
    double log_k = static_cast<double>(mean_i.size()) * std::log(theta);
    for (Eigen::Index d = 0; d < mean_i.size(); ++d) {
        double s = var_i[d] + var_j[d] + theta * theta;
        double delta = mean_i[d] - mean_j[d];
        log_k += -0.5 * std::log(s) - 0.5 * delta * delta / s;
    }
    return std::exp(log_k);
}

namespace {

Eigen::MatrixXd build_kernel(const Eigen::MatrixXd& mean, const Eigen::MatrixXd& var,
                             double theta) {
    const Eigen::Index n = mean.rows();
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            double v = gp_kernel(mean.row(i), var.row(i), mean.row(j), var.row(j), theta);
            k(i, j) = v;
            k(j, i) = v;
        }
    }
    return k;
}

// Cholesky with escalating jitter (x10 up to 1e-2).
Eigen::LLT<Eigen::MatrixXd> factor_kernel(const Eigen::MatrixXd& k, double jitter,
                                          double* used_jitter) {
    Eigen::MatrixXd id = Eigen::MatrixXd::Identity(k.rows(), k.cols());
    for (double j = jitter; j <= 1e-2 * (1.0 + 1e-12); j *= 10.0) {
        Eigen::LLT<Eigen::MatrixXd> llt(k + j * id);
        if (llt.info() == Eigen::Success) {
            if (used_jitter) *used_jitter = j;
            return llt;
        }
    }
    throw std::runtime_error("kernel matrix not positive definite");
}

double half_log_det(const Eigen::LLT<Eigen::MatrixXd>& llt) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < llt.matrixL().rows(); ++i)
        s += std::log(llt.matrixL()(i, i));
    return s;
}

// Per-sample data likelihood: returns the NLL sum and fills the gradient
// with respect to the latent matrix.
using NllFn = std::function<double(const Eigen::MatrixXd&, Eigen::MatrixXd*)>;

struct MapResult {
    Eigen::MatrixXd latents;
    double objective = 0.0;
};

MapResult fit_latents(const Eigen::LLT<Eigen::MatrixXd>& llt, const NllFn& nll,
                      Eigen::Index n, Eigen::Index q, int max_iterations,
                      const Eigen::MatrixXd* warm_start = nullptr) {
    // Optimize in the whitened parameterization w = L u so the prior term is
    // 0.5 |u|^2; descent in w-space stalls on the ill-conditioned K^{-1}.
    const Eigen::MatrixXd l = llt.matrixL();
    Eigen::MatrixXd u = Eigen::MatrixXd::Zero(n, q);
    if (warm_start)
        u = l.triangularView<Eigen::Lower>().solve(*warm_start);
    Eigen::MatrixXd grad_w(n, q), grad(n, q);

    auto objective = [&](const Eigen::MatrixXd& white, Eigen::MatrixXd* g) {
        Eigen::MatrixXd latents = l * white;
        double data = nll(latents, g ? &grad_w : nullptr);
        if (g) *g = l.transpose() * grad_w + white;
        return data + 0.5 * white.squaredNorm();
    };

    double j = objective(u, &grad);
    double step = 0.1;
    for (int it = 0; it < max_iterations; ++it) {
        bool accepted = false;
        for (int back = 0; back < 40; ++back) {
            Eigen::MatrixXd cand = u - step * grad;
            double jc = objective(cand, nullptr);
            if (jc < j) {
                u = cand;
                double improvement = j - jc;
                j = jc;
                objective(u, &grad);
                step *= 1.2;
                accepted = true;
                if (improvement < 1e-9 * (std::abs(j) + 1.0)) it = max_iterations;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
    }
    return {l * u, j};
}

std::vector<Eigen::Index> subsample_indices(std::size_t n, int max_points) {
    std::size_t m = std::min<std::size_t>(n, static_cast<std::size_t>(max_points));
    std::vector<Eigen::Index> idx(m);
    for (std::size_t i = 0; i < m; ++i)
        idx[i] = static_cast<Eigen::Index>(i * n / m);
    return idx;
}

constexpr double kCdfEps = 1e-12;

// Negative log density of the beta-link calibrated distribution at the
// ground truth, plus gradient w.r.t. (log a, log b, c).
double beta_link_nll(double r, double mu, double var, double wa, double wb,
                     double wc, Eigen::Vector3d* grad) {
    double sigma = std::sqrt(var);
    double z = (r - mu) / sigma;
    double f = std::clamp(stats::normal_cdf(z), kCdfEps, 1.0 - kCdfEps);
    double a = std::exp(wa), b = std::exp(wb);
    double lf = std::log(f), l1f = std::log1p(-f);
    double u = a * lf - b * l1f + wc;
    double g = stats::sigmoid(u);
    double s = a / f + b / (1.0 - f);
    // -log G - log(1-G) expressed stably.
    double nll = (u > 0.0 ? u + 2.0 * std::log1p(std::exp(-u))
                          : -u + 2.0 * std::log1p(std::exp(u))) -
                 std::log(s) - stats::normal_log_pdf(z, 0.0, 1.0) + std::log(sigma);
    if (grad) {
        double du = 2.0 * g - 1.0;
        (*grad)[0] = a * (du * lf - (1.0 / f) / s);
        (*grad)[1] = b * (-du * l1f - (1.0 / (1.0 - f)) / s);
        (*grad)[2] = du;
    }
    return nll;
}

NllFn make_nll(GpKind kind, const std::vector<const RegressionSample*>& samples,
               int dim) {
    switch (kind) {
        case GpKind::Normal:
            return [&samples, dim](const Eigen::MatrixXd& w, Eigen::MatrixXd* grad) {
                double total = 0.0;
                for (Eigen::Index i = 0; i < w.rows(); ++i) {
                    const RegressionSample& s = *samples[static_cast<std::size_t>(i)];
                    double r = s.gt[dim] - s.mean[dim];
                    double ratio = r * r / s.var[dim] * std::exp(-2.0 * w(i, 0));
                    total += 0.5 * std::log(2.0 * stats::kPi * s.var[dim]) + w(i, 0) +
                             0.5 * ratio;
                    if (grad) (*grad)(i, 0) = 1.0 - ratio;
                }
                return total;
            };
        case GpKind::Cauchy:
            return [&samples, dim](const Eigen::MatrixXd& w, Eigen::MatrixXd* grad) {
                double total = 0.0;
                for (Eigen::Index i = 0; i < w.rows(); ++i) {
                    const RegressionSample& s = *samples[static_cast<std::size_t>(i)];
                    double gamma = std::exp(w(i, 0)) * std::sqrt(s.var[dim]);
                    double z = (s.gt[dim] - s.mean[dim]) / gamma;
                    total += std::log(stats::kPi * gamma) + std::log1p(z * z);
                    if (grad) (*grad)(i, 0) = 1.0 - 2.0 * z * z / (1.0 + z * z);
                }
                return total;
            };
        case GpKind::Beta:
            return [&samples, dim](const Eigen::MatrixXd& w, Eigen::MatrixXd* grad) {
                double total = 0.0;
                Eigen::Vector3d g;
                for (Eigen::Index i = 0; i < w.rows(); ++i) {
                    const RegressionSample& s = *samples[static_cast<std::size_t>(i)];
                    total += beta_link_nll(s.gt[dim], s.mean[dim], s.var[dim], w(i, 0),
                                           w(i, 1), w(i, 2), grad ? &g : nullptr);
                    if (grad) grad->row(i) = g.transpose();
                }
                return total;
            };
        case GpKind::NormalMv:
            return [&samples](const Eigen::MatrixXd& w, Eigen::MatrixXd* grad) {
                double total = 0.0;
                for (Eigen::Index i = 0; i < w.rows(); ++i) {
                    const RegressionSample& s = *samples[static_cast<std::size_t>(i)];
                    for (Eigen::Index d = 0; d < s.mean.size(); ++d) {
                        double r = s.gt[d] - s.mean[d];
                        double ratio = r * r / s.var[d] * std::exp(-2.0 * w(i, d));
                        total += 0.5 * std::log(2.0 * stats::kPi * s.var[d]) + w(i, d) +
                                 0.5 * ratio;
                        if (grad) (*grad)(i, d) = 1.0 - ratio;
                    }
                }
                return total;
            };
    }
    throw std::logic_error("unreachable");
}

struct FittedGp {
    GpModel model;
    double objective = 0.0;
};

FittedGp fit_gp_model(const Eigen::MatrixXd& mean, const Eigen::MatrixXd& var,
                      Eigen::Index q, const NllFn& nll, const GpFitConfig& config) {
    const Eigen::Index n = mean.rows();

    auto evaluate = [&](double theta, GpModel* out) {
        Eigen::MatrixXd k = build_kernel(mean, var, theta);
        double used_jitter = config.jitter;
        Eigen::LLT<Eigen::MatrixXd> llt = factor_kernel(k, config.jitter, &used_jitter);
        MapResult map = fit_latents(llt, nll, n, q, config.max_iterations);
        // Laplace-style model selection: the joint prior normalizer cancels
        // against the posterior curvature, leaving 0.5 log|I + K H| with the
        // data curvature approximated as H = 2I. A degenerate kernel (theta
        // at either extreme) is penalized instead of rewarded.
        Eigen::MatrixXd evidence = 2.0 * k;
        evidence.diagonal().array() += 1.0;
        Eigen::LLT<Eigen::MatrixXd> evidence_llt(evidence);
        double score = map.objective + static_cast<double>(q) * half_log_det(evidence_llt);
        if (out) {
            out->train_mean = mean;
            out->train_var = var;
            out->latents = map.latents;
            out->alpha = llt.solve(map.latents);
            out->coreg = Eigen::MatrixXd::Identity(q, q);
            out->theta = theta;
            out->jitter = used_jitter;
        }
        return score;
    };

    double best_log_theta = std::log(config.theta_init);
    if (config.optimize_theta) {
        // Golden-section search over log theta.
        const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
        double a = config.theta_log_lo, b = config.theta_log_hi;
        double c = b - gr * (b - a), d = a + gr * (b - a);
        double fc = evaluate(std::exp(c), nullptr);
        double fd = evaluate(std::exp(d), nullptr);
        for (int it = 0; it < config.theta_iterations; ++it) {
            if (fc < fd) {
                b = d;
                d = c;
                fd = fc;
                c = b - gr * (b - a);
                fc = evaluate(std::exp(c), nullptr);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + gr * (b - a);
                fd = evaluate(std::exp(d), nullptr);
            }
        }
        best_log_theta = 0.5 * (a + b);
    }

    FittedGp fitted;
    fitted.objective = evaluate(std::exp(best_log_theta), &fitted.model);
    return fitted;
}

}  // namespace

Eigen::VectorXd GpModel::predict(const Eigen::VectorXd& mean,
                                 const Eigen::VectorXd& var) const {
    const Eigen::Index n = train_mean.rows();
    Eigen::VectorXd kstar(n);
    for (Eigen::Index i = 0; i < n; ++i)
        kstar[i] = gp_kernel(mean, var, train_mean.row(i), train_var.row(i), theta);
    Eigen::VectorXd out = alpha.transpose() * kstar;
    for (Eigen::Index i = 0; i < out.size(); ++i)
        out[i] = std::clamp(out[i], -6.0, 6.0);
    return out;
}

GpCalibrator fit_gp(GpKind kind, const RegressionDataset& dataset,
                    const GpFitConfig& config) {
    dataset.validate();
    if (dataset.samples.size() < 16) throw std::invalid_argument("too few samples");
    const std::size_t l = dataset.dims();

    std::vector<Eigen::Index> idx = subsample_indices(dataset.samples.size(),
                                                      config.max_points);
    std::vector<const RegressionSample*> sub;
    sub.reserve(idx.size());
    for (Eigen::Index i : idx)
        sub.push_back(&dataset.samples[static_cast<std::size_t>(i)]);
    const Eigen::Index m = static_cast<Eigen::Index>(sub.size());

    GpCalibrator calibrator;
    calibrator.kind = kind;

    if (kind == GpKind::NormalMv) {
        Eigen::MatrixXd mean(m, static_cast<Eigen::Index>(l));
        Eigen::MatrixXd var(m, static_cast<Eigen::Index>(l));
        for (Eigen::Index i = 0; i < m; ++i) {
            mean.row(i) = sub[static_cast<std::size_t>(i)]->mean.transpose();
            var.row(i) = sub[static_cast<std::size_t>(i)]->var.transpose();
        }
        NllFn nll = make_nll(kind, sub, 0);
        calibrator.models.push_back(
            fit_gp_model(mean, var, static_cast<Eigen::Index>(l), nll, config).model);
        return calibrator;
    }

    const Eigen::Index q = kind == GpKind::Beta ? 3 : 1;
    for (std::size_t d = 0; d < l; ++d) {
        Eigen::MatrixXd mean(m, 1), var(m, 1);
        for (Eigen::Index i = 0; i < m; ++i) {
            mean(i, 0) = sub[static_cast<std::size_t>(i)]->mean[static_cast<Eigen::Index>(d)];
            var(i, 0) = sub[static_cast<std::size_t>(i)]->var[static_cast<Eigen::Index>(d)];
        }
        NllFn nll = make_nll(kind, sub, static_cast<int>(d));
        calibrator.models.push_back(fit_gp_model(mean, var, q, nll, config).model);
    }
    return calibrator;
}

std::vector<CalibratedDistribution> transform_gp(const GpCalibrator& calibrator,
                                                 const Eigen::VectorXd& mean,
                                                 const Eigen::VectorXd& var,
                                                 int support_points) {
    const Eigen::Index l = mean.size();
    std::vector<CalibratedDistribution> out(static_cast<std::size_t>(l));

    if (calibrator.kind == GpKind::NormalMv) {
        Eigen::VectorXd w = calibrator.models.front().predict(mean, var);
        for (Eigen::Index d = 0; d < l; ++d) {
            out[static_cast<std::size_t>(d)].kind = CalibratedDistribution::Kind::Gaussian;
            out[static_cast<std::size_t>(d)].mu = mean[d];
            out[static_cast<std::size_t>(d)].var = std::exp(2.0 * w[d]) * var[d];
        }
        return out;
    }

    for (Eigen::Index d = 0; d < l; ++d) {
        const GpModel& model = calibrator.models[static_cast<std::size_t>(d)];
        Eigen::VectorXd in_mean(1), in_var(1);
        in_mean[0] = mean[d];
        in_var[0] = var[d];
        Eigen::VectorXd w = model.predict(in_mean, in_var);
        CalibratedDistribution& dist = out[static_cast<std::size_t>(d)];
        switch (calibrator.kind) {
            case GpKind::Normal:
                dist.kind = CalibratedDistribution::Kind::Gaussian;
                dist.mu = mean[d];
                dist.var = std::exp(2.0 * w[0]) * var[d];
                break;
            case GpKind::Cauchy:
                dist.kind = CalibratedDistribution::Kind::Cauchy;
                dist.location = mean[d];
                dist.scale = std::exp(w[0]) * std::sqrt(var[d]);
                break;
            case GpKind::Beta: {
                double a = std::exp(w[0]), b = std::exp(w[1]), c = w[2];
                double sigma = std::sqrt(var[d]);
                dist.kind = CalibratedDistribution::Kind::Nonparametric;
                dist.support.resize(static_cast<std::size_t>(support_points));
                dist.cdf.resize(static_cast<std::size_t>(support_points));
                for (int i = 0; i < support_points; ++i) {
                    double z = -8.0 + 16.0 * static_cast<double>(i) /
                                          static_cast<double>(support_points - 1);
                    double f = std::clamp(stats::normal_cdf(z), kCdfEps, 1.0 - kCdfEps);
                    dist.support[static_cast<std::size_t>(i)] = mean[d] + z * sigma;
                    dist.cdf[static_cast<std::size_t>(i)] = stats::sigmoid(
                        a * std::log(f) - b * std::log1p(-f) + c);
                }
                double lo = dist.cdf.front(), hi = dist.cdf.back();
                for (double& cv : dist.cdf) cv = (cv - lo) / (hi - lo);
                break;
            }
            default:
                throw std::logic_error("unreachable");
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Covariance estimation

namespace {

// Unpivoted LDL^T of an SPD matrix: A = L D L^T, L unit lower triangular.
void ldl_decompose(const Eigen::MatrixXd& a, Eigen::MatrixXd* l, Eigen::VectorXd* d) {
    const Eigen::Index n = a.rows();
    *l = Eigen::MatrixXd::Identity(n, n);
    d->resize(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        double dj = a(j, j);
        for (Eigen::Index k = 0; k < j; ++k) dj -= (*l)(j, k) * (*l)(j, k) * (*d)[k];
        if (!(dj > 0.0)) throw std::runtime_error("matrix not positive definite");
        (*d)[j] = dj;
        for (Eigen::Index i = j + 1; i < n; ++i) {
            double v = a(i, j);
            for (Eigen::Index k = 0; k < j; ++k)
                v -= (*l)(i, k) * (*l)(j, k) * (*d)[k];
            (*l)(i, j) = v / dj;
        }
    }
}

Eigen::MatrixXd correlation_prior(const Eigen::MatrixXd& corr,
                                  const Eigen::VectorXd& var) {
    const Eigen::Index l = var.size();
    Eigen::MatrixXd sigma(l, l);
    for (Eigen::Index i = 0; i < l; ++i)
        for (Eigen::Index j = 0; j < l; ++j)
            sigma(i, j) = corr(i, j) * std::sqrt(var[i] * var[j]);
    return sigma;
}

// Latent layout for the covariance GP: first L(L-1)/2 channels are additive
// adjustments to the strictly-lower L entries (row-major), the last L are
// log multipliers on D.
Eigen::MatrixXd adjusted_covariance(const Eigen::MatrixXd& corr,
                                    const Eigen::VectorXd& var,
                                    const Eigen::VectorXd& w) {
    const Eigen::Index l = var.size();
    Eigen::MatrixXd lt;
    Eigen::VectorXd d;
    ldl_decompose(correlation_prior(corr, var), &lt, &d);
    Eigen::Index c = 0;
    for (Eigen::Index i = 1; i < l; ++i)
        for (Eigen::Index j = 0; j < i; ++j) lt(i, j) += w[c++];
    for (Eigen::Index i = 0; i < l; ++i) d[i] *= std::exp(w[c + i]);
    return lt * d.asDiagonal() * lt.transpose();
}

}  // namespace

CovarianceModel estimate_covariance(const RegressionDataset& dataset,
                                    const GpFitConfig& config) {
    dataset.validate();
    const std::size_t n = dataset.samples.size();
    const Eigen::Index l = static_cast<Eigen::Index>(dataset.dims());
    if (l < 2) throw std::invalid_argument("need at least two dimensions");

    // Marginal correlations of the standardized residuals.
    Eigen::MatrixXd z(static_cast<Eigen::Index>(n), l);
    for (std::size_t i = 0; i < n; ++i) {
        const RegressionSample& s = dataset.samples[i];
        for (Eigen::Index d = 0; d < l; ++d)
            z(static_cast<Eigen::Index>(i), d) =
                (s.gt[d] - s.mean[d]) / std::sqrt(s.var[d]);
    }
    Eigen::RowVectorXd mean = z.colwise().mean();
    Eigen::MatrixXd centered = z.rowwise() - mean;
    Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
    CovarianceModel model;
    model.corr = Eigen::MatrixXd::Identity(l, l);
    for (Eigen::Index i = 0; i < l; ++i)
        for (Eigen::Index j = 0; j < l; ++j)
            if (i != j)
                model.corr(i, j) =
                    std::clamp(cov(i, j) / std::sqrt(cov(i, i) * cov(j, j)), -0.99, 0.99);

    if (config.max_iterations <= 0 || n < 16) return model;

    std::vector<Eigen::Index> idx = subsample_indices(n, config.max_points);
    const Eigen::Index m = static_cast<Eigen::Index>(idx.size());
    std::vector<const RegressionSample*> sub;
    sub.reserve(idx.size());
    for (Eigen::Index i : idx) sub.push_back(&dataset.samples[static_cast<std::size_t>(i)]);

    Eigen::MatrixXd in_mean(m, l), in_var(m, l);
    for (Eigen::Index i = 0; i < m; ++i) {
        in_mean.row(i) = sub[static_cast<std::size_t>(i)]->mean.transpose();
        in_var.row(i) = sub[static_cast<std::size_t>(i)]->var.transpose();
    }

    const Eigen::Index n_off = l * (l - 1) / 2;
    const Eigen::Index q = n_off + l;
    const Eigen::MatrixXd corr = model.corr;

    NllFn nll = [&sub, &corr, l, n_off](const Eigen::MatrixXd& w,
                                        Eigen::MatrixXd* grad) {
        double total = 0.0;
        Eigen::MatrixXd lt;
        Eigen::VectorXd d;
        for (Eigen::Index i = 0; i < w.rows(); ++i) {
            const RegressionSample& s = *sub[static_cast<std::size_t>(i)];
            ldl_decompose(correlation_prior(corr, s.var), &lt, &d);
            Eigen::Index c = 0;
            Eigen::MatrixXd a = lt;
            for (Eigen::Index r = 1; r < l; ++r)
                for (Eigen::Index col = 0; col < r; ++col) a(r, col) += w(i, c++);
            Eigen::VectorXd dp = d;
            for (Eigen::Index r = 0; r < l; ++r) dp[r] *= std::exp(w(i, n_off + r));

            Eigen::VectorXd resid = s.gt - s.mean;
            Eigen::VectorXd y = a.triangularView<Eigen::Lower>().solve(resid);
            for (Eigen::Index r = 0; r < l; ++r)
                total += 0.5 * (std::log(2.0 * stats::kPi * dp[r]) + y[r] * y[r] / dp[r]);
            if (grad) {
                Eigen::VectorXd g = y.cwiseQuotient(dp);
                Eigen::VectorXd at_g =
                    a.transpose().triangularView<Eigen::Upper>().solve(g);
                Eigen::MatrixXd da = -at_g * y.transpose();
                Eigen::Index cc = 0;
                for (Eigen::Index r = 1; r < l; ++r)
                    for (Eigen::Index col = 0; col < r; ++col)
                        (*grad)(i, cc++) = da(r, col);
                for (Eigen::Index r = 0; r < l; ++r)
                    (*grad)(i, n_off + r) = 0.5 * (1.0 - y[r] * y[r] / dp[r]);
            }
        }
        return total;
    };

    model.gp = fit_gp_model(in_mean, in_var, q, nll, config).model;
    model.has_gp = true;
    return model;
}

Eigen::MatrixXd transform_covariance(const CovarianceModel& model,
                                     const Eigen::VectorXd& mean,
                                     const Eigen::VectorXd& var) {
    if (!model.has_gp) return correlation_prior(model.corr, var);
    Eigen::VectorXd w = model.gp.predict(mean, var);
    Eigen::MatrixXd sigma = adjusted_covariance(model.corr, var, w);
    return 0.5 * (sigma + sigma.transpose());  // scrub round-off asymmetry
}

}  // namespace ct
