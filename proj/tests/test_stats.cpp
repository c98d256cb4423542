#include <doctest.h>

#include <cmath>
#include <initializer_list>

#include "rng.hpp"
#include "stats.hpp"

namespace {

// Independent oracle: invert the erfc-based normal CDF by plain bisection.
double normal_quantile_oracle(double tau) {
    double lo = -20.0, hi = 20.0;
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        (ct::stats::normal_cdf(mid) < tau ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// Independent oracle for the chi-square CDF via the exact finite closed
// forms (erf-based for odd dof, exponential sum for even dof), avoiding
// the incomplete-gamma series used by the implementation.
double chi2_cdf_oracle(double x, int dof) {
    if (x <= 0.0) return 0.0;
    if (dof % 2 == 0) {
        // F(x; 2m) = 1 - exp(-x/2) * sum_{k<m} (x/2)^k / k!
        int m = dof / 2;
        double term = 1.0, sum = 1.0;
        for (int k = 1; k < m; ++k) {
            term *= 0.5 * x / k;
            sum += term;
        }
        return 1.0 - std::exp(-0.5 * x) * sum;
    }
    // F(x; 2m+1) = 2 Phi(sqrt(x)) - 1 - 2 phi(sqrt(x)) sum_{k=1..m}
    //              x^{k-1/2} / (1 * 3 * ... * (2k-1))
    int m = (dof - 1) / 2;
    double s = std::sqrt(x);
    double base = std::erf(s / std::sqrt(2.0));
    double phi = std::exp(-0.5 * x) / std::sqrt(2.0 * 3.14159265358979323846);
    double term = s, sum = 0.0;
    for (int k = 1; k <= m; ++k) {
        if (k > 1) term *= x / (2.0 * k - 1.0);
        sum += term;
    }
    return base - 2.0 * phi * sum;
}

double chi2_quantile_oracle(int dof, double tau) {
    double lo = 0.0, hi = 1.0;
    while (chi2_cdf_oracle(hi, dof) < tau) hi *= 2.0;
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        (chi2_cdf_oracle(mid, dof) < tau ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("normal quantile matches the bisection oracle") {
    for (double tau = 0.01; tau < 0.995; tau += 0.007) {
        CHECK(std::abs(ct::stats::normal_quantile(tau) - normal_quantile_oracle(tau)) <
              1e-8);
    }
}

TEST_CASE("normal quantile reference values and symmetry") {
    CHECK(std::abs(ct::stats::normal_quantile(0.5)) < 1e-12);
    CHECK(ct::stats::normal_quantile(0.975) == doctest::Approx(1.959964).epsilon(1e-6));
    CHECK(ct::stats::normal_quantile(0.975, 2.0, 3.0) ==
          doctest::Approx(2.0 + 3.0 * 1.959964).epsilon(1e-6));
    for (double tau : {0.1, 0.25, 0.4, 0.45}) {
        CHECK(std::abs(ct::stats::normal_quantile(tau) +
                       ct::stats::normal_quantile(1.0 - tau)) < 1e-9);
    }
}

TEST_CASE("chi-square quantile matches the Simpson oracle") {
    for (int dof = 1; dof <= 8; ++dof) {
        for (double tau : {0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99}) {
            double got = ct::stats::chi2_quantile(dof, tau);
            double want = chi2_quantile_oracle(dof, tau);
            CHECK(std::abs(got - want) < 1e-8 * std::max(1.0, want));
        }
    }
}

TEST_CASE("chi-square reference values") {
    CHECK(ct::stats::chi2_quantile(1, 0.5) == doctest::Approx(0.454936).epsilon(1e-5));
    CHECK(ct::stats::chi2_quantile(4, 0.95) == doctest::Approx(9.487729).epsilon(1e-6));
}

TEST_CASE("chi-square quantile is monotone in tau") {
    for (int dof : {1, 4, 8}) {
        double prev = 0.0;
        for (double tau = 0.05; tau < 1.0; tau += 0.05) {
            double q = ct::stats::chi2_quantile(dof, tau);
            CHECK(q > prev);
            prev = q;
        }
    }
}

TEST_CASE("counter rng is deterministic and roughly uniform") {
    ct::Rng a(42, 7), b(42, 7);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    ct::Rng r(1, 0);
    double sum = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) sum += r.uniform();
    CHECK(sum / n == doctest::Approx(0.5).epsilon(0.02));

    ct::Rng g(3, 1);
    double m = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        double x = g.normal();
        m += x;
        s2 += x * x;
    }
    CHECK(std::abs(m / n) < 0.05);
    CHECK(s2 / n == doctest::Approx(1.0).epsilon(0.05));
}
