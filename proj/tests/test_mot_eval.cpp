#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "core_model.hpp"
#include "mot_eval.hpp"
#include "rng.hpp"

using ct::MotBox;

namespace {

MotBox box(int frame, std::int64_t id, double cx, double cy = 0.5, double w = 0.1,
           double h = 0.1, int label = 0) {
    MotBox b;
    b.frame_id = frame;
    b.id = id;
    b.label = label;
    b.box = ct::BoundingBox{cx, cy, w, h};
    return b;
}

// Exhaustive IDF1 oracle: try every injective gt-id -> track-id mapping.
double idf1_brute(const std::vector<MotBox>& gt, const std::vector<MotBox>& tracks,
                  double iou_threshold) {
    std::vector<std::int64_t> gt_ids, tr_ids;
    for (const auto& b : gt)
        if (std::find(gt_ids.begin(), gt_ids.end(), b.id) == gt_ids.end())
            gt_ids.push_back(b.id);
    for (const auto& b : tracks)
        if (std::find(tr_ids.begin(), tr_ids.end(), b.id) == tr_ids.end())
            tr_ids.push_back(b.id);

    auto idtp_pair = [&](std::int64_t g, std::int64_t t) {
        std::map<int, const MotBox*> gt_by_frame;
        for (const auto& b : gt)
            if (b.id == g) gt_by_frame[b.frame_id] = &b;
        std::int64_t n = 0;
        for (const auto& b : tracks) {
            if (b.id != t) continue;
            auto it = gt_by_frame.find(b.frame_id);
            if (it == gt_by_frame.end()) continue;
            if (it->second->label == b.label &&
                ct::iou(it->second->box, b.box) >= iou_threshold)
                ++n;
        }
        return n;
    };

    // Pad track ids with "unmatched" slots so every permutation is a valid
    // partial mapping.
    while (tr_ids.size() < gt_ids.size()) tr_ids.push_back(-1);
    std::sort(tr_ids.begin(), tr_ids.end());
    std::int64_t best = 0;
    do {
        std::int64_t total = 0;
        for (std::size_t i = 0; i < gt_ids.size(); ++i) {
            if (tr_ids[i] < 0) continue;
            total += idtp_pair(gt_ids[i], tr_ids[i]);
        }
        best = std::max(best, total);
    } while (std::next_permutation(tr_ids.begin(), tr_ids.end()));

    return 2.0 * static_cast<double>(best) /
           static_cast<double>(gt.size() + tracks.size());
}

}  // namespace

TEST_CASE("perfect tracker scores ones across the board") {
    std::vector<MotBox> gt, tracks;
    for (int f = 0; f < 10; ++f) {
        gt.push_back(box(f, 1, 0.2 + 0.01 * f));
        gt.push_back(box(f, 2, 0.7));
        tracks.push_back(box(f, 101, 0.2 + 0.01 * f));
        tracks.push_back(box(f, 102, 0.7));
    }
    auto r = ct::evaluate_mot(gt, tracks);
    CHECK(r.mota == doctest::Approx(1.0));
    CHECK(r.idf1 == doctest::Approx(1.0));
    CHECK(r.motp_iou == doctest::Approx(1.0));
    CHECK(std::abs(r.motp_distance) < 1e-12);
    CHECK(r.idsw == 0);
    CHECK(r.fp == 0);
    CHECK(r.fn == 0);
    CHECK(r.tp == 20);
    CHECK(r.mt == doctest::Approx(1.0));
    CHECK(r.ml == doctest::Approx(0.0));
}

TEST_CASE("hand-traced identity switch") {
    // One object, three frames; the track id changes once at frame 2.
    std::vector<MotBox> gt = {box(0, 1, 0.5), box(1, 1, 0.5), box(2, 1, 0.5)};
    std::vector<MotBox> tracks = {box(0, 10, 0.5), box(1, 10, 0.5), box(2, 20, 0.5)};
    auto r = ct::evaluate_mot(gt, tracks);
    CHECK(r.tp == 3);
    CHECK(r.fp == 0);
    CHECK(r.fn == 0);
    CHECK(r.idsw == 1);
    CHECK(r.mota == doctest::Approx(2.0 / 3.0));
    // Best identity mapping keeps the two-frame track: IDTP = 2.
    CHECK(r.idf1 == doctest::Approx(2.0 * 2.0 / 6.0));
    CHECK(r.mt == doctest::Approx(1.0));
}

TEST_CASE("false positives can push mota negative") {
    std::vector<MotBox> gt = {box(0, 1, 0.5)};
    std::vector<MotBox> tracks = {box(0, 10, 0.5), box(0, 11, 0.1), box(0, 12, 0.9)};
    auto r = ct::evaluate_mot(gt, tracks);
    CHECK(r.tp == 1);
    CHECK(r.fp == 2);
    CHECK(r.mota == doctest::Approx(-1.0));
}

TEST_CASE("missing tracks yield zero mota and idf1") {
    std::vector<MotBox> gt = {box(0, 1, 0.5), box(1, 1, 0.5)};
    auto r = ct::evaluate_mot(gt, {});
    CHECK(r.fn == 2);
    CHECK(std::abs(r.mota) < 1e-12);
    CHECK(std::abs(r.idf1) < 1e-12);
    CHECK(r.ml == doctest::Approx(1.0));
}

TEST_CASE("empty ground truth is rejected") {
    CHECK_THROWS_AS(ct::evaluate_mot({}, {box(0, 1, 0.5)}), std::invalid_argument);
}

TEST_CASE("label mismatch counts as both a miss and a false positive") {
    std::vector<MotBox> gt = {box(0, 1, 0.5, 0.5, 0.1, 0.1, /*label=*/0)};
    std::vector<MotBox> tracks = {box(0, 10, 0.5, 0.5, 0.1, 0.1, /*label=*/1)};
    auto r = ct::evaluate_mot(gt, tracks);
    CHECK(r.tp == 0);
    CHECK(r.fp == 1);
    CHECK(r.fn == 1);
}

TEST_CASE("metrics are invariant to a consistent relabeling of track ids") {
    ct::Rng rng(61, 3);
    std::vector<MotBox> gt, tracks;
    for (int f = 0; f < 15; ++f) {
        for (int o = 0; o < 4; ++o) {
            double cx = 0.15 + 0.2 * o + 0.005 * f;
            gt.push_back(box(f, o + 1, cx));
            if (rng.uniform() < 0.85)
                tracks.push_back(box(f, 100 + o, cx + 0.005 * rng.normal()));
        }
        if (rng.uniform() < 0.3) tracks.push_back(box(f, 500 + f, 0.95));
    }
    auto a = ct::evaluate_mot(gt, tracks);
    std::vector<MotBox> relabeled = tracks;
    for (auto& b : relabeled) b.id = b.id * 7 + 13;
    auto b = ct::evaluate_mot(gt, relabeled);
    CHECK(a.mota == doctest::Approx(b.mota));
    CHECK(a.idf1 == doctest::Approx(b.idf1));
    CHECK(a.idsw == b.idsw);
    CHECK(a.motp_iou == doctest::Approx(b.motp_iou));
}

TEST_CASE("idf1 matches the exhaustive mapping oracle") {
    ct::Rng rng(67, 2);
    for (int trial = 0; trial < 30; ++trial) {
        int n_gt = 1 + static_cast<int>(rng.uniform() * 4.0);
        int n_tr = 1 + static_cast<int>(rng.uniform() * 4.0);
        int frames = 4 + static_cast<int>(rng.uniform() * 5.0);
        std::vector<MotBox> gt, tracks;
        for (int f = 0; f < frames; ++f) {
            for (int o = 0; o < n_gt; ++o) {
                if (rng.uniform() < 0.2) continue;
                gt.push_back(box(f, o + 1, 0.1 + 0.18 * o));
            }
            for (int t = 0; t < n_tr; ++t) {
                if (rng.uniform() < 0.3) continue;
                // Tracks roughly follow one of the gt lanes, sometimes the
                // wrong one.
                int lane = rng.uniform() < 0.75
                               ? t % n_gt
                               : static_cast<int>(rng.uniform() * n_gt);
                tracks.push_back(box(f, 100 + t, 0.1 + 0.18 * lane));
            }
        }
        if (gt.empty()) continue;
        auto r = ct::evaluate_mot(gt, tracks, 0.5);
        CHECK(r.idf1 == doctest::Approx(idf1_brute(gt, tracks, 0.5)).epsilon(1e-9));
    }
}

TEST_CASE("mostly-tracked and mostly-lost boundaries") {
    // Object covered in 4 of 5 frames (0.8 -> MT); another in 0 of 5 (ML);
    // a third in 2 of 5 (PT).
    std::vector<MotBox> gt, tracks;
    for (int f = 0; f < 5; ++f) {
        gt.push_back(box(f, 1, 0.2));
        gt.push_back(box(f, 2, 0.5));
        gt.push_back(box(f, 3, 0.8));
        if (f < 4) tracks.push_back(box(f, 11, 0.2));
        if (f < 2) tracks.push_back(box(f, 13, 0.8));
    }
    auto r = ct::evaluate_mot(gt, tracks);
    CHECK(r.mt == doctest::Approx(1.0 / 3.0));
    CHECK(r.ml == doctest::Approx(1.0 / 3.0));
    CHECK(r.pt == doctest::Approx(1.0 / 3.0));
}
