#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace ct {

// Axis-aligned box in center/size encoding. Coordinates are either
// image-relative in [0,1] or pixels; a dataset must use one convention
// throughout.
struct BoundingBox {
    double cx = 0.0;
    double cy = 0.0;
    double w = 0.0;
    double h = 0.0;

    bool valid() const { return w > 0.0 && h > 0.0; }
    double x1() const { return cx - 0.5 * w; }
    double y1() const { return cy - 0.5 * h; }
    double x2() const { return cx + 0.5 * w; }
    double y2() const { return cy + 0.5 * h; }
    double area() const { return w * h; }
};

struct Detection {
    int label = 0;
    double confidence = 0.0;
    BoundingBox box;
    std::optional<std::array<double, 4>> box_variances;  // cx, cy, w, h
    std::int64_t frame_id = 0;
    std::int64_t detection_id = 0;
};

struct GroundTruthObject {
    int label = 0;
    BoundingBox box;
    std::int64_t frame_id = 0;
    std::int64_t object_id = 0;
};

// One detection joined with ground truth; the substrate for every
// calibrator and metric. gt_box is present iff matched.
struct CalibrationSample {
    double confidence = 0.0;
    int label = 0;
    BoundingBox box;
    bool matched = false;
    std::optional<std::array<double, 4>> box_variances;
    std::optional<BoundingBox> gt_box;
};

struct MatchedDataset {
    std::vector<CalibrationSample> samples;
    double iou_threshold = 0.5;
};

double iou(const BoundingBox& a, const BoundingBox& b);

struct MatchResult {
    std::vector<bool> matched;            // per detection, input order
    std::vector<int> gt_index;            // index into ground_truths, -1 if unmatched
};

// Greedy confidence-descending matching within one frame (COCO
// convention). Ties in confidence break by detection_id ascending, ties
// in IoU by gt object_id ascending. Label must agree.
MatchResult match_frame(const std::vector<Detection>& detections,
                        const std::vector<GroundTruthObject>& ground_truths,
                        double iou_threshold);

struct Frame {
    std::vector<Detection> detections;
    std::vector<GroundTruthObject> ground_truths;
};

// Concatenated per-frame matching; detections below min_confidence are
// dropped. Throws if pixel and relative coordinate conventions are mixed.
MatchedDataset build_dataset(const std::vector<Frame>& frames, double iou_threshold,
                             double min_confidence = 0.3);

}  // namespace ct
