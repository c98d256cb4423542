#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "regression_metrics.hpp"
#include "rng.hpp"
#include "stats.hpp"

using ct::GaussianPrediction;
using ct::RegressionDataset;
using ct::RegressionSample;

namespace {

RegressionSample rs(std::initializer_list<double> mean, std::initializer_list<double> var,
                    std::initializer_list<double> gt) {
    RegressionSample s;
    s.mean = Eigen::VectorXd::Map(mean.begin(), static_cast<Eigen::Index>(mean.size()));
    s.var = Eigen::VectorXd::Map(var.begin(), static_cast<Eigen::Index>(var.size()));
    s.gt = Eigen::VectorXd::Map(gt.begin(), static_cast<Eigen::Index>(gt.size()));
    return s;
}

// Draws where the ground truth really follows the predicted Gaussian.
RegressionDataset calibrated_dataset(std::uint64_t seed, int n, int dims) {
    ct::Rng rng(seed, 6);
    RegressionDataset d;
    for (int i = 0; i < n; ++i) {
        RegressionSample s;
        s.mean = Eigen::VectorXd::Zero(dims);
        s.var = Eigen::VectorXd::Zero(dims);
        s.gt = Eigen::VectorXd::Zero(dims);
        for (int k = 0; k < dims; ++k) {
            s.mean[k] = rng.normal();
            double sigma = 0.2 + rng.uniform();
            s.var[k] = sigma * sigma;
            s.gt[k] = s.mean[k] + sigma * rng.normal();
        }
        d.samples.push_back(std::move(s));
    }
    return d;
}

}  // namespace

TEST_CASE("validation catches bad datasets") {
    RegressionDataset empty;
    CHECK_THROWS_AS(empty.validate(), std::invalid_argument);

    RegressionDataset bad;
    bad.samples = {rs({0.0}, {0.0}, {0.0})};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    RegressionDataset mixed;
    mixed.samples = {rs({0.0}, {1.0}, {0.0}), rs({0.0, 0.0}, {1.0, 1.0}, {0.0, 0.0})};
    CHECK_THROWS_AS(mixed.validate(), std::invalid_argument);
}

TEST_CASE("tau grid spans 0.05 to 0.95 in 19 steps") {
    auto grid = ct::tau_grid();
    REQUIRE(grid.size() == 19);
    CHECK(grid.front() == doctest::Approx(0.05));
    CHECK(grid.back() == doctest::Approx(0.95));
}

TEST_CASE("pinball hand values") {
    RegressionDataset d;
    d.samples = {rs({0.0}, {1.0}, {1.0})};
    // tau=0.5 quantile is the mean; loss = 0.5 * (1 - 0).
    CHECK(ct::pinball(d, 0.5, 0) == doctest::Approx(0.5));

    RegressionDataset exact;
    exact.samples = {rs({0.0}, {1.0}, {0.0})};
    CHECK(std::abs(ct::pinball(exact, 0.5, 0)) < 1e-12);

    // tau=0.9: quantile z_0.9, gt below it -> (1-0.9) * (q - gt).
    double q = ct::stats::normal_quantile(0.9);
    CHECK(ct::pinball(exact, 0.9, 0) == doctest::Approx(0.1 * q));
}

TEST_CASE("interval picp and mpiw hand values") {
    double z = ct::stats::normal_quantile(0.95);  // central 90% half-width
    RegressionDataset d;
    d.samples = {rs({0.0}, {1.0}, {1.0}), rs({0.0}, {1.0}, {2.0})};
    // |1| <= 1.645, |2| > 1.645.
    CHECK(ct::interval_picp(d, 0.9, 0) == doctest::Approx(0.5));
    CHECK(ct::interval_mpiw(d, 0.9, 0) == doctest::Approx(2.0 * z));

    RegressionDataset wide;
    wide.samples = {rs({0.0}, {4.0}, {0.0})};
    CHECK(ct::interval_mpiw(wide, 0.9, 0) == doctest::Approx(4.0 * z));
}

TEST_CASE("nees hand values and diagonal consistency") {
    GaussianPrediction p;
    p.mean = Eigen::VectorXd::Zero(4);
    p.cov = Eigen::MatrixXd::Identity(4, 4);
    p.gt = Eigen::VectorXd::Ones(4);
    CHECK(ct::nees(p) == doctest::Approx(4.0));

    auto s = rs({1.0, 2.0}, {4.0, 0.25}, {3.0, 1.0});
    // (2^2)/4 + (1^2)/0.25 = 1 + 4 = 5.
    CHECK(ct::nees_diagonal(s) == doctest::Approx(5.0));

    GaussianPrediction pd;
    pd.mean = s.mean;
    pd.cov = s.var.asDiagonal();
    pd.gt = s.gt;
    CHECK(ct::nees(pd) == doctest::Approx(ct::nees_diagonal(s)));

    GaussianPrediction bad = pd;
    bad.cov(0, 1) = bad.cov(1, 0) = 10.0;  // indefinite
    CHECK_THROWS_AS(ct::nees(bad), std::invalid_argument);
}

TEST_CASE("sgv is the geometric mean of the eigenvalue spectrum") {
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(2, 2);
    cov(0, 0) = 1.0;
    cov(1, 1) = 4.0;
    CHECK(ct::sgv(cov) == doctest::Approx(2.0));
    CHECK(ct::sgv(Eigen::MatrixXd::Identity(5, 5)) == doctest::Approx(1.0));
}

TEST_CASE("m_qce hand value and calibrated monte carlo") {
    RegressionDataset one;
    one.samples = {rs({0.0, 0.0}, {1.0, 1.0}, {0.0, 0.0})};
    // gt at the mean is always inside -> coverage 1, error 1 - tau.
    CHECK(ct::m_qce(one, 0.95) == doctest::Approx(0.05));

    auto d = calibrated_dataset(5, 10000, 4);
    CHECK(ct::m_qce(d, 0.95) < 0.02);
    CHECK(ct::m_qce_mean(d) < 0.02);
}

TEST_CASE("c_qce is small when every variance bin is calibrated") {
    auto d = calibrated_dataset(9, 10000, 2);
    CHECK(ct::c_qce(d, 0.9, 10) < 0.05);
}

TEST_CASE("uce hand value") {
    RegressionDataset d;
    // Single bin (equal variances): MSE = (1 + 3)/2 = 2, mean variance 1.
    d.samples = {rs({0.0}, {1.0}, {1.0}), rs({0.0}, {1.0}, {std::sqrt(3.0)})};
    CHECK(ct::uce(d, 0, 5) == doctest::Approx(1.0));

    // Perfectly matched squared errors give zero.
    RegressionDataset good;
    good.samples = {rs({0.0}, {4.0}, {2.0}), rs({0.0}, {4.0}, {-2.0})};
    CHECK(std::abs(ct::uce(good, 0, 5)) < 1e-12);
}

TEST_CASE("ence hand value") {
    RegressionDataset d;
    // One populated bin: RMV = 2, RMSE = 4 -> |4-2|/2 = 1.
    d.samples = {rs({0.0}, {4.0}, {4.0})};
    CHECK(ct::ence(d, 0, 3) == doctest::Approx(1.0));

    // Two bins, each internally exact -> 0.
    RegressionDataset good;
    good.samples = {rs({0.0}, {1.0}, {1.0}), rs({0.0}, {9.0}, {3.0})};
    CHECK(std::abs(ct::ence(good, 0, 2)) < 1e-12);
}

TEST_CASE("gaussian nll hand values") {
    RegressionDataset d;
    d.samples = {rs({0.0}, {1.0}, {0.0})};
    CHECK(ct::nll_gaussian(d) == doctest::Approx(0.5 * std::log(2.0 * ct::stats::kPi)));

    RegressionDataset shifted;
    shifted.samples = {rs({0.0}, {4.0}, {0.0})};
    CHECK(ct::nll_gaussian(shifted) ==
          doctest::Approx(0.5 * std::log(2.0 * ct::stats::kPi) + std::log(2.0)));

    RegressionDataset off;
    off.samples = {rs({0.0}, {1.0}, {2.0})};
    CHECK(ct::nll_gaussian(off) ==
          doctest::Approx(0.5 * std::log(2.0 * ct::stats::kPi) + 2.0));
}

TEST_CASE("full-covariance nll reduces to the diagonal form") {
    auto d = calibrated_dataset(13, 200, 3);
    std::vector<GaussianPrediction> preds;
    for (const auto& s : d.samples) {
        GaussianPrediction p;
        p.mean = s.mean;
        p.cov = s.var.asDiagonal();
        p.gt = s.gt;
        preds.push_back(std::move(p));
    }
    CHECK(ct::nll_gaussian_full(preds) == doctest::Approx(ct::nll_gaussian(d)));
}

TEST_CASE("chi-square helper reference value") {
    CHECK(ct::chi2_quantile_of(4, 0.95) == doctest::Approx(9.487729).epsilon(1e-6));
    CHECK(ct::gaussian_quantile(2.0, 3.0, 0.975) ==
          doctest::Approx(2.0 + 3.0 * 1.959964).epsilon(1e-6));
}
