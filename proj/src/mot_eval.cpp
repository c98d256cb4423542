#include "mot_eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

#include "hungarian.hpp"

namespace ct {

namespace {

double center_distance(const BoundingBox& a, const BoundingBox& b) {
    double dx = a.cx - b.cx, dy = a.cy - b.cy;
    return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

MotReport evaluate_mot(const std::vector<MotBox>& ground_truth,
                       const std::vector<MotBox>& tracks, double iou_threshold) {
    if (ground_truth.empty()) throw std::invalid_argument("empty ground truth");

    std::map<int, std::vector<const MotBox*>> gt_by_frame, tr_by_frame;
    for (const MotBox& b : ground_truth) gt_by_frame[b.frame_id].push_back(&b);
    for (const MotBox& b : tracks) tr_by_frame[b.frame_id].push_back(&b);

    std::set<int> frame_ids;
    for (const auto& [f, v] : gt_by_frame) frame_ids.insert(f);
    for (const auto& [f, v] : tr_by_frame) frame_ids.insert(f);

    MotReport report;
    report.frames = static_cast<std::int64_t>(frame_ids.size());
    report.gt_total = static_cast<std::int64_t>(ground_truth.size());
    report.track_total = static_cast<std::int64_t>(tracks.size());

    double dist_sum = 0.0, iou_sum = 0.0;
    std::map<std::int64_t, std::int64_t> carried;       // gt id -> track id (CLEAR pair)
    std::map<std::int64_t, std::int64_t> last_matched;  // gt id -> last track id ever
    std::map<std::int64_t, std::int64_t> gt_frames, gt_covered;

    for (int frame : frame_ids) {
        const std::vector<const MotBox*>& gts =
            gt_by_frame.count(frame) ? gt_by_frame[frame] : std::vector<const MotBox*>{};
        const std::vector<const MotBox*>& trs =
            tr_by_frame.count(frame) ? tr_by_frame[frame] : std::vector<const MotBox*>{};
        for (const MotBox* g : gts) ++gt_frames[g->id];

        std::vector<char> gt_done(gts.size(), 0), tr_done(trs.size(), 0);
        std::vector<std::pair<std::size_t, std::size_t>> matches;

        // Persist previous pairs while they still overlap.
        for (std::size_t i = 0; i < gts.size(); ++i) {
            auto it = carried.find(gts[i]->id);
            if (it == carried.end()) continue;
            for (std::size_t j = 0; j < trs.size(); ++j) {
                if (tr_done[j] || trs[j]->id != it->second) continue;
                if (trs[j]->label == gts[i]->label &&
                    iou(gts[i]->box, trs[j]->box) >= iou_threshold) {
                    matches.emplace_back(i, j);
                    gt_done[i] = 1;
                    tr_done[j] = 1;
                }
                break;
            }
        }

        // Hungarian on IoU for the remainder.
        std::vector<std::size_t> free_gt, free_tr;
        for (std::size_t i = 0; i < gts.size(); ++i)
            if (!gt_done[i]) free_gt.push_back(i);
        for (std::size_t j = 0; j < trs.size(); ++j)
            if (!tr_done[j]) free_tr.push_back(j);
        if (!free_gt.empty() && !free_tr.empty()) {
            Eigen::MatrixXd cost(static_cast<Eigen::Index>(free_gt.size()),
                                 static_cast<Eigen::Index>(free_tr.size()));
            for (std::size_t a = 0; a < free_gt.size(); ++a) {
                for (std::size_t b = 0; b < free_tr.size(); ++b) {
                    const MotBox* g = gts[free_gt[a]];
                    const MotBox* t = trs[free_tr[b]];
                    double ov = g->label == t->label ? iou(g->box, t->box) : 0.0;
                    cost(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
                        ov >= iou_threshold ? 1.0 - ov : kForbiddenCost;
                }
            }
            std::vector<int> assignment = hungarian(cost);
            for (std::size_t a = 0; a < free_gt.size(); ++a) {
                int b = assignment[a];
                if (b < 0) continue;
                matches.emplace_back(free_gt[a], free_tr[static_cast<std::size_t>(b)]);
                gt_done[free_gt[a]] = 1;
                tr_done[free_tr[static_cast<std::size_t>(b)]] = 1;
            }
        }

        std::map<std::int64_t, std::int64_t> next_carried;
        for (auto [i, j] : matches) {
            const MotBox* g = gts[i];
            const MotBox* t = trs[j];
            ++report.tp;
            ++gt_covered[g->id];
            dist_sum += center_distance(g->box, t->box);
            iou_sum += iou(g->box, t->box);
            auto last = last_matched.find(g->id);
            if (last != last_matched.end() && last->second != t->id) ++report.idsw;
            last_matched[g->id] = t->id;
            next_carried[g->id] = t->id;
        }
        carried = std::move(next_carried);

        for (std::size_t i = 0; i < gts.size(); ++i)
            if (!gt_done[i]) ++report.fn;
        for (std::size_t j = 0; j < trs.size(); ++j)
            if (!tr_done[j]) ++report.fp;
    }

    report.mota = 1.0 - static_cast<double>(report.fp + report.fn + report.idsw) /
                            static_cast<double>(report.gt_total);
    report.motp_distance = report.tp > 0 ? dist_sum / static_cast<double>(report.tp) : 0.0;
    report.motp_iou = report.tp > 0 ? iou_sum / static_cast<double>(report.tp) : 0.0;
    report.fp_per_frame = static_cast<double>(report.fp) / static_cast<double>(report.frames);
    report.fn_per_frame = static_cast<double>(report.fn) / static_cast<double>(report.frames);

    // Trajectory coverage classes.
    report.objects = static_cast<std::int64_t>(gt_frames.size());
    std::int64_t mt = 0, ml = 0;
    for (const auto& [id, total] : gt_frames) {
        double coverage = static_cast<double>(gt_covered[id]) / static_cast<double>(total);
        if (coverage >= 0.8)
            ++mt;
        else if (coverage < 0.2)
            ++ml;
    }
    report.mt = static_cast<double>(mt) / static_cast<double>(report.objects);
    report.ml = static_cast<double>(ml) / static_cast<double>(report.objects);
    report.pt = 1.0 - report.mt - report.ml;
    report.idsw_per_object =
        static_cast<double>(report.idsw) / static_cast<double>(report.objects);

    // IDF1 by global trajectory assignment: cost of a pairing is the number
    // of detections left unmatched by it.
    {
        std::map<std::int64_t, std::vector<const MotBox*>> gt_traj, tr_traj;
        for (const MotBox& b : ground_truth) gt_traj[b.id].push_back(&b);
        for (const MotBox& b : tracks) tr_traj[b.id].push_back(&b);
        std::vector<std::int64_t> gt_ids, tr_ids;
        for (const auto& [id, v] : gt_traj) gt_ids.push_back(id);
        for (const auto& [id, v] : tr_traj) tr_ids.push_back(id);
        const std::size_t g_n = gt_ids.size(), t_n = tr_ids.size();

        auto pair_cost = [&](std::size_t gi, std::size_t tj) {
            const std::vector<const MotBox*>& g = gt_traj[gt_ids[gi]];
            const std::vector<const MotBox*>& t = tr_traj[tr_ids[tj]];
            std::map<int, const MotBox*> t_by_frame;
            for (const MotBox* b : t) t_by_frame[b->frame_id] = b;
            std::int64_t overlap = 0;
            for (const MotBox* b : g) {
                auto it = t_by_frame.find(b->frame_id);
                if (it != t_by_frame.end() && it->second->label == b->label &&
                    iou(b->box, it->second->box) >= iou_threshold)
                    ++overlap;
            }
            return static_cast<double>(static_cast<std::int64_t>(g.size()) +
                                       static_cast<std::int64_t>(t.size()) - 2 * overlap);
        };

        // Square system with explicit leave-unmatched slots.
        const std::size_t n = g_n + t_n;
        Eigen::MatrixXd cost = Eigen::MatrixXd::Constant(
            static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n), kForbiddenCost);
        for (std::size_t i = 0; i < g_n; ++i)
            for (std::size_t j = 0; j < t_n; ++j)
                cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    pair_cost(i, j);
        for (std::size_t i = 0; i < g_n; ++i)
            cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t_n + i)) =
                static_cast<double>(gt_traj[gt_ids[i]].size());
        for (std::size_t j = 0; j < t_n; ++j)
            cost(static_cast<Eigen::Index>(g_n + j), static_cast<Eigen::Index>(j)) =
                static_cast<double>(tr_traj[tr_ids[j]].size());
        for (std::size_t i = 0; i < t_n; ++i)
            for (std::size_t j = 0; j < g_n; ++j)
                cost(static_cast<Eigen::Index>(g_n + i),
                     static_cast<Eigen::Index>(t_n + j)) = 0.0;

        std::vector<int> assignment = hungarian(cost);
        double total_cost = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            int j = assignment[i];
            if (j >= 0) total_cost += cost(static_cast<Eigen::Index>(i), j);
        }
        double idtp = 0.5 * (static_cast<double>(report.gt_total + report.track_total) -
                             total_cost);
        report.idf1 = 2.0 * idtp /
                      static_cast<double>(report.gt_total + report.track_total);
    }

    return report;
}

}  // namespace ct
