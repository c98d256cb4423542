#include <doctest.h>

#include <cmath>

#include "confidence_metrics.hpp"
#include "mot_eval.hpp"
#include "regression_calibration.hpp"
#include "scaling_calibration.hpp"
#include "stats.hpp"
#include "synthetic.hpp"
#include "tracking.hpp"

using ct::DetectorDistortion;
using ct::ScenarioConfig;

TEST_CASE("generation is deterministic in the seed") {
    DetectorDistortion distortion;
    distortion.link_w = 0.6;
    distortion.link_delta = 0.2;
    auto a = ct::generate_detection_dataset(distortion, 500, 42);
    auto b = ct::generate_detection_dataset(distortion, 500, 42);
    auto c = ct::generate_detection_dataset(distortion, 500, 43);
    REQUIRE(a.samples.size() == 500);
    REQUIRE(b.samples.size() == 500);
    bool differs = false;
    for (std::size_t i = 0; i < 500; ++i) {
        CHECK(a.samples[i].confidence == b.samples[i].confidence);
        CHECK(a.samples[i].matched == b.samples[i].matched);
        CHECK(a.samples[i].box.cx == b.samples[i].box.cx);
        if (a.samples[i].confidence != c.samples[i].confidence) differs = true;
    }
    CHECK(differs);
}

TEST_CASE("identity link produces calibrated confidences") {
    DetectorDistortion identity;
    auto d = ct::generate_detection_dataset(identity, 50000, 7);
    CHECK(ct::ece(d, 20) < 0.02);
}

TEST_CASE("match probability follows the configured link") {
    DetectorDistortion distortion;
    distortion.link_w = 0.5;
    distortion.link_delta = 0.3;
    distortion.positional_weight = 0.4;
    double got = ct::distortion_match_probability(distortion, 0.7, 0.9);
    double want =
        ct::stats::sigmoid(0.5 * ct::stats::logit(0.7) + 0.3 + 0.4 * (0.9 - 0.5));
    CHECK(got == doctest::Approx(want).epsilon(1e-12));

    // Empirical positive rate should agree with the analytic link.
    auto d = ct::generate_detection_dataset(distortion, 60000, 11);
    double analytic = 0.0, empirical = 0.0;
    for (const auto& s : d.samples) {
        analytic += ct::distortion_match_probability(distortion, s.confidence, s.box.cx);
        empirical += s.matched ? 1.0 : 0.0;
    }
    CHECK(empirical / 60000.0 == doctest::Approx(analytic / 60000.0).epsilon(0.02));
}

TEST_CASE("fitted logistic scaling recovers the generating link") {
    DetectorDistortion distortion;
    distortion.link_w = 0.5;
    distortion.link_delta = 0.3;
    auto d = ct::generate_detection_dataset(distortion, 50000, 13);
    auto fit = ct::fit_scaling(ct::ScalingMethod::Logistic, d,
                               {ct::BoxFeature::Confidence});
    CHECK(std::exp(fit.model.params[0]) == doctest::Approx(0.5).epsilon(0.1));
    CHECK(fit.model.params[1] == doctest::Approx(0.3).epsilon(0.17));

    // Sup-distance of the fitted transform from the true link stays small.
    double sup = 0.0;
    for (double c = 0.05; c < 0.999; c += 0.002) {
        ct::CalibrationSample s;
        s.confidence = c;
        s.box = ct::BoundingBox{0.5, 0.5, 0.1, 0.1};
        double truth = ct::distortion_match_probability(distortion, c, 0.5);
        sup = std::max(sup, std::abs(fit.model.transform(s) - truth));
    }
    CHECK(sup < 0.03);
}

TEST_CASE("variance scaling recovers the injected inflation") {
    DetectorDistortion distortion;
    distortion.variance_scale = 2.0;
    auto d = ct::generate_detection_dataset(distortion, 40000, 17);
    auto reg = ct::to_regression(d);
    REQUIRE(!reg.samples.empty());
    auto model = ct::fit_variance_scaling(reg);
    for (int k = 0; k < model.w.size(); ++k) {
        CHECK(model.w[k] == doctest::Approx(2.0).epsilon(0.03));
    }
}

TEST_CASE("regression view exposes only matched samples") {
    DetectorDistortion distortion;
    distortion.link_delta = -1.0;
    auto d = ct::generate_detection_dataset(distortion, 2000, 19);
    auto reg = ct::to_regression(d);
    std::size_t matched = 0;
    for (const auto& s : d.samples) matched += s.matched ? 1 : 0;
    CHECK(reg.samples.size() == matched);
    CHECK(reg.dims() == 4);
}

TEST_CASE("tracking sequences are deterministic and well formed") {
    ScenarioConfig config;
    config.frames = 30;
    config.false_positives_per_frame = 1.0;
    DetectorDistortion distortion;
    auto a = ct::generate_tracking_sequence(config, distortion, 5);
    auto b = ct::generate_tracking_sequence(config, distortion, 5);
    REQUIRE(a.size() == 30);
    for (std::size_t f = 0; f < a.size(); ++f) {
        REQUIRE(a[f].detections.size() == b[f].detections.size());
        CHECK(a[f].ground_truths.size() == static_cast<std::size_t>(config.objects));
        for (std::size_t i = 0; i < a[f].detections.size(); ++i) {
            CHECK(a[f].detections[i].box.cx == b[f].detections[i].box.cx);
            CHECK(a[f].detections[i].confidence == b[f].detections[i].confidence);
        }
    }
}

TEST_CASE("a clean sequence is tracked perfectly") {
    ScenarioConfig config;
    config.objects = 4;
    config.frames = 40;
    config.detection_probability = 1.0;
    config.false_positives_per_frame = 0.0;
    DetectorDistortion distortion;
    auto frames = ct::generate_tracking_sequence(config, distortion, 23);

    // Process-noise and prior scales matched to unit-normalized coordinates;
    // a wide gate keeps in-distribution observation noise from being rejected
    // and spawning duplicate tracks.
    ct::TrackerConfig tracker_config;
    tracker_config.kalman.process_noise = 1e-5;
    tracker_config.kalman.initial_velocity_var = 1e-2;
    tracker_config.kalman.initial_acceleration_var = 1e-3;
    tracker_config.kalman.default_observation_var = 2.5e-5;
    tracker_config.existence.gate_quantile = 0.9999;
    ct::Tracker tracker(tracker_config);
    std::vector<ct::MotBox> gt, tracks;
    for (std::size_t f = 0; f < frames.size(); ++f) {
        auto out = tracker.step(static_cast<int>(f), frames[f].detections);
        for (const auto& o : out) {
            tracks.push_back({o.frame_id, o.track_id, o.label, o.box});
        }
        for (const auto& g : frames[f].ground_truths) {
            gt.push_back({static_cast<int>(f), g.object_id, g.label, g.box});
        }
    }
    auto report = ct::evaluate_mot(gt, tracks);
    CHECK(report.mota == doctest::Approx(1.0));
    CHECK(report.idsw == 0);
    CHECK(report.idf1 == doctest::Approx(1.0));
}

TEST_CASE("false-positive rate follows the configuration") {
    ScenarioConfig config;
    config.objects = 2;
    config.frames = 400;
    config.false_positives_per_frame = 2.0;
    DetectorDistortion distortion;
    auto frames = ct::generate_tracking_sequence(config, distortion, 29);
    double extra = 0.0;
    for (const auto& f : frames) {
        extra += static_cast<double>(f.detections.size());
    }
    // Expected detections per frame: ~2 objects * p + 2 false positives.
    double per_frame = extra / 400.0;
    CHECK(per_frame == doctest::Approx(2.0 * config.detection_probability + 2.0)
                           .epsilon(0.1));
}
