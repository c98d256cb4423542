#include <doctest.h>

#include <cmath>

#include "binning_calibration.hpp"
#include "rng.hpp"
#include "stats.hpp"

using ct::BinningScheme;
using ct::BoxFeature;
using ct::CalibrationSample;
using ct::MatchedDataset;

namespace {

CalibrationSample sample(double conf, bool matched, double cx = 0.5) {
    CalibrationSample s;
    s.confidence = conf;
    s.matched = matched;
    s.box = ct::BoundingBox{cx, 0.5, 0.1, 0.1};
    return s;
}

}  // namespace

TEST_CASE("histogram cells store the empirical precision") {
    MatchedDataset d;
    d.samples = {sample(0.1, false), sample(0.2, true), sample(0.8, true),
                 sample(0.9, true), sample(0.7, false), sample(0.6, true)};
    auto scheme = BinningScheme::uniform(1, 2, 0);
    auto model = ct::fit_histogram(d, {BoxFeature::Confidence}, scheme);
    // Low bin: 1/2 positive. High bin: 3/4 positive.
    CHECK(model.transform(sample(0.3, false)) == doctest::Approx(0.5));
    CHECK(model.transform(sample(0.75, false)) == doctest::Approx(0.75));
}

TEST_CASE("empty cells fall back to the global positive rate") {
    MatchedDataset d;
    d.samples = {sample(0.9, true), sample(0.9, true), sample(0.9, false)};
    auto scheme = BinningScheme::uniform(1, 10, 0);
    auto model = ct::fit_histogram(d, {BoxFeature::Confidence}, scheme);
    CHECK(model.transform(sample(0.05, false)) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("add-one smoothing shrinks cell estimates toward one half") {
    MatchedDataset d;
    d.samples = {sample(0.9, true), sample(0.9, true), sample(0.9, true)};
    auto scheme = BinningScheme::uniform(1, 2, 0);
    auto plain = ct::fit_histogram(d, {BoxFeature::Confidence}, scheme, false);
    auto smooth = ct::fit_histogram(d, {BoxFeature::Confidence}, scheme, true);
    CHECK(plain.transform(sample(0.9, false)) == doctest::Approx(1.0));
    CHECK(smooth.transform(sample(0.9, false)) == doctest::Approx(4.0 / 5.0));
}

TEST_CASE("training-set dece vanishes after histogram calibration") {
    ct::Rng rng(17, 0);
    MatchedDataset d;
    for (int i = 0; i < 4000; ++i) {
        double c = rng.uniform();
        // Deliberately miscalibrated: match rate is c^2.
        d.samples.push_back(sample(c, rng.uniform() < c * c, rng.uniform()));
    }
    auto scheme = BinningScheme::uniform(1, 20, 0);
    auto model = ct::fit_histogram(d, {BoxFeature::Confidence}, scheme);

    MatchedDataset calibrated = d;
    for (auto& s : calibrated.samples) s.confidence = model.transform(s);
    // Each calibrated confidence equals its source cell's precision, but the
    // scoring re-bins by the new value, so score with the cell-exact grid:
    // replace confidence by theta and bin on the original confidence too.
    // Simplest exact check: per original cell, mean calibrated conf equals
    // precision, so D-ECE over the original binning is zero.
    double weighted = 0.0;
    for (int b = 0; b < scheme.total_bins(); ++b) {
        double conf_sum = 0.0, match_sum = 0.0;
        std::size_t n = 0;
        for (std::size_t i = 0; i < d.samples.size(); ++i) {
            if (scheme.bin_of(d.samples[i].confidence, 0) != b) continue;
            conf_sum += calibrated.samples[i].confidence;
            match_sum += calibrated.samples[i].matched ? 1.0 : 0.0;
            ++n;
        }
        if (n) weighted += std::fabs(conf_sum - match_sum);
    }
    CHECK(weighted / d.samples.size() < 1e-9);
}

TEST_CASE("multidimensional histogram calibrates position-dependent bias") {
    ct::Rng rng(23, 5);
    MatchedDataset d;
    for (int i = 0; i < 8000; ++i) {
        double c = 0.3 + 0.6 * rng.uniform();
        double cx = rng.uniform();
        double p = ct::stats::clamp01(c + 0.3 * (cx - 0.5), 1e-3);
        d.samples.push_back(sample(c, rng.uniform() < p, cx));
    }
    auto features = ct::FeatureSet{BoxFeature::Confidence, BoxFeature::Cx};
    auto scheme = BinningScheme::uniform(2, 5, 8);
    auto model = ct::fit_histogram(d, features, scheme);

    MatchedDataset calibrated = d;
    for (auto& s : calibrated.samples) s.confidence = model.transform(s);
    auto eval_scheme = BinningScheme::uniform(2, 5, 8);
    double before = ct::dece(d, features, eval_scheme);
    // After calibration bin on (cal-conf, cx); binning moved, so just require
    // a clear improvement rather than exact zero.
    double after = ct::dece(calibrated, features, eval_scheme);
    CHECK(after < before);
    CHECK(after < 0.05);
}
