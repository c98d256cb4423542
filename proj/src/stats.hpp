#pragma once

#include <cmath>

namespace ct::stats {

inline constexpr double kPi = 3.14159265358979323846;

inline double clamp01(double p, double eps = 0.0) {
    if (p < eps) return eps;
    if (p > 1.0 - eps) return 1.0 - eps;
    return p;
}

inline double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    double e = std::exp(x);
    return e / (1.0 + e);
}

// log(p / (1-p)) with p clamped away from the boundaries.
inline double logit(double p, double eps = 1e-6) {
    p = clamp01(p, eps);
    return std::log(p / (1.0 - p));
}

inline double normal_pdf(double x, double mu = 0.0, double sigma = 1.0) {
    double z = (x - mu) / sigma;
    return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * kPi));
}

inline double normal_cdf(double x, double mu = 0.0, double sigma = 1.0) {
    return 0.5 * std::erfc(-(x - mu) / (sigma * std::sqrt(2.0)));
}

inline double normal_log_pdf(double x, double mu, double var) {
    double d = x - mu;
    return -0.5 * (std::log(2.0 * kPi * var) + d * d / var);
}

// Percent-point function of N(mu, sigma^2). Rational approximation refined
// by one Halley step; absolute error below 1e-9 on (0,1).
double normal_quantile(double tau, double mu = 0.0, double sigma = 1.0);

// Regularized lower incomplete gamma P(a, x).
double gamma_p(double a, double x);

inline double chi2_cdf(double x, int dof) {
    return x <= 0.0 ? 0.0 : gamma_p(0.5 * dof, 0.5 * x);
}

// Inverse chi-square CDF by bisection on gamma_p, converged to 1e-10.
double chi2_quantile(int dof, double tau);

inline double cauchy_pdf(double x, double location, double scale) {
    double z = (x - location) / scale;
    return 1.0 / (kPi * scale * (1.0 + z * z));
}

inline double cauchy_log_pdf(double x, double location, double scale) {
    double z = (x - location) / scale;
    return -std::log(kPi * scale) - std::log1p(z * z);
}

inline double cauchy_cdf(double x, double location, double scale) {
    return 0.5 + std::atan2(x - location, scale) / kPi;
}

inline double log_beta(double a, double b) {
    return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

}  // namespace ct::stats
