#include "core_model.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace ct {

double iou(const BoundingBox& a, const BoundingBox& b) {
    double ix = std::min(a.x2(), b.x2()) - std::max(a.x1(), b.x1());
    double iy = std::min(a.y2(), b.y2()) - std::max(a.y1(), b.y1());
    if (ix <= 0.0 || iy <= 0.0) return 0.0;
    double inter = ix * iy;
    return inter / (a.area() + b.area() - inter);
}

MatchResult match_frame(const std::vector<Detection>& detections,
                        const std::vector<GroundTruthObject>& ground_truths,
                        double iou_threshold) {
    MatchResult result;
    result.matched.assign(detections.size(), false);
    result.gt_index.assign(detections.size(), -1);

    std::vector<std::size_t> order(detections.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        if (detections[i].confidence != detections[j].confidence) {
            return detections[i].confidence > detections[j].confidence;
        }
        return detections[i].detection_id < detections[j].detection_id;
    });

    std::vector<bool> claimed(ground_truths.size(), false);
    for (std::size_t di : order) {
        const Detection& det = detections[di];
        int best = -1;
        double best_iou = -1.0;
        for (std::size_t gi = 0; gi < ground_truths.size(); ++gi) {
            if (claimed[gi] || ground_truths[gi].label != det.label) continue;
            double ov = iou(det.box, ground_truths[gi].box);
            if (ov < iou_threshold) continue;
            if (ov > best_iou ||
                (ov == best_iou &&
                 ground_truths[gi].object_id < ground_truths[best].object_id)) {
                best = static_cast<int>(gi);
                best_iou = ov;
            }
        }
        if (best >= 0) {
            claimed[best] = true;
            result.matched[di] = true;
            result.gt_index[di] = best;
        }
    }
    return result;
}

MatchedDataset build_dataset(const std::vector<Frame>& frames, double iou_threshold,
                             double min_confidence) {
    bool saw_relative = false, saw_pixel = false;
    auto note_convention = [&](const BoundingBox& b) {
        if (b.x2() > 1.5 || b.y2() > 1.5) {
            saw_pixel = true;
        } else {
            saw_relative = true;
        }
    };

    MatchedDataset dataset;
    dataset.iou_threshold = iou_threshold;
    for (const Frame& frame : frames) {
        MatchResult match = match_frame(frame.detections, frame.ground_truths, iou_threshold);
        for (std::size_t i = 0; i < frame.detections.size(); ++i) {
            const Detection& det = frame.detections[i];
            if (det.confidence < min_confidence) continue;
            note_convention(det.box);
            CalibrationSample sample;
            sample.confidence = det.confidence;
            sample.label = det.label;
            sample.box = det.box;
            sample.box_variances = det.box_variances;
            sample.matched = match.matched[i];
            if (sample.matched) {
                sample.gt_box = frame.ground_truths[match.gt_index[i]].box;
            }
            dataset.samples.push_back(std::move(sample));
        }
    }
    if (saw_relative && saw_pixel) {
        throw std::invalid_argument("build_dataset: mixed pixel and relative box conventions");
    }
    return dataset;
}

}  // namespace ct
