#pragma once

#include <cstdint>
#include <vector>

#include "core_model.hpp"

namespace ct {

// One identified box in one frame, either a ground-truth object or an
// emitted track.
struct MotBox {
    int frame_id = 0;
    std::int64_t id = 0;
    int label = 0;
    BoundingBox box;
};

struct MotReport {
    double mota = 0.0;
    double motp_distance = 0.0;  // mean center distance over TPs
    double motp_iou = 0.0;       // mean IoU over TPs
    double idf1 = 0.0;
    double fp_per_frame = 0.0;
    double fn_per_frame = 0.0;
    double idsw_per_object = 0.0;
    double mt = 0.0, pt = 0.0, ml = 0.0;  // trajectory-coverage fractions
    std::int64_t tp = 0, fp = 0, fn = 0, idsw = 0;
    std::int64_t frames = 0, objects = 0;
    std::int64_t gt_total = 0, track_total = 0;
};

MotReport evaluate_mot(const std::vector<MotBox>& ground_truth,
                       const std::vector<MotBox>& tracks,
                       double iou_threshold = 0.5);

}  // namespace ct
