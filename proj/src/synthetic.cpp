#include "synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "rng.hpp"
#include "stats.hpp"

namespace ct {

namespace {

// Confidence prior: even mixture of two beta-shaped densities (one mass
// near each extreme), sampled by inverting a tabulated CDF.
class ConfidenceTable {
  public:
    ConfidenceTable() {
        double acc = 0.0;
        for (std::size_t i = 0; i < kTable; ++i) {
            double p = (static_cast<double>(i) + 0.5) / kTable;
            double low = p * std::pow(1.0 - p, 4.0);   // beta(2, 5) shape
            double high = std::pow(p, 4.0) * (1.0 - p);  // beta(5, 2) shape
            acc += 0.5 * (low + high);
            cdf_[i] = acc;
        }
        for (double& c : cdf_) c /= acc;
    }

    double sample(double u) const {
        auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
        std::size_t i = it == cdf_.end() ? kTable - 1
                                         : static_cast<std::size_t>(it - cdf_.begin());
        double c0 = i == 0 ? 0.0 : cdf_[i - 1];
        double t = cdf_[i] > c0 ? (u - c0) / (cdf_[i] - c0) : 0.5;
        return (static_cast<double>(i) + t) / kTable;
    }

  private:
    static constexpr std::size_t kTable = 2048;
    std::array<double, kTable> cdf_{};
};

const ConfidenceTable& confidence_table() {
    static const ConfidenceTable table;
    return table;
}

double reported_sigma_at(const DetectorDistortion& distortion, double mu) {
    return distortion.reported_sigma *
           std::max(1.0 + distortion.reported_sigma_slope * mu, 0.05);
}

double true_residual_std(const DetectorDistortion& distortion, double mu) {
    double profile = 1.0 + distortion.variance_profile_amp *
                               std::sin(2.0 * stats::kPi * mu);
    return distortion.variance_scale * std::max(profile, 0.05) *
           reported_sigma_at(distortion, mu);
}

double draw_noise(Rng* rng, const DetectorDistortion& distortion, double scale) {
    return distortion.noise == DetectorDistortion::Noise::Cauchy
               ? rng->cauchy(0.0, scale)
               : rng->normal(0.0, scale);
}

}  // namespace

double distortion_match_probability(const DetectorDistortion& distortion,
                                    double confidence, double cx) {
    double z = distortion.link_w * stats::logit(confidence) + distortion.link_delta +
               distortion.positional_weight * (cx - 0.5);
    return stats::sigmoid(z);
}

MatchedDataset generate_detection_dataset(const DetectorDistortion& distortion,
                                          std::size_t n, std::uint64_t seed) {
    if (n == 0) throw std::invalid_argument("n must be positive");
    MatchedDataset dataset;
    dataset.samples.reserve(n);
    Rng rng(seed, 0xd47aULL);

    for (std::size_t i = 0; i < n; ++i) {
        CalibrationSample s;
        s.confidence = confidence_table().sample(rng.uniform());
        s.box.cx = rng.uniform(0.1, 0.9);
        s.box.cy = rng.uniform(0.1, 0.9);
        s.box.w = rng.uniform(0.05, 0.3);
        s.box.h = rng.uniform(0.05, 0.3);
        s.matched = rng.bernoulli(
            distortion_match_probability(distortion, s.confidence, s.box.cx));
        const double mus[4] = {s.box.cx, s.box.cy, s.box.w, s.box.h};
        std::array<double, 4> vars{};
        for (int d = 0; d < 4; ++d) {
            double sigma = reported_sigma_at(distortion, mus[d]);
            vars[static_cast<std::size_t>(d)] = sigma * sigma;
        }
        s.box_variances = vars;
        if (s.matched) {
            BoundingBox gt = s.box;
            double* coords[4] = {&gt.cx, &gt.cy, &gt.w, &gt.h};
            for (int d = 0; d < 4; ++d)
                *coords[d] += draw_noise(&rng, distortion,
                                         true_residual_std(distortion, mus[d]));
            gt.w = std::max(gt.w, 1e-4);
            gt.h = std::max(gt.h, 1e-4);
            s.gt_box = gt;
        }
        dataset.samples.push_back(s);
    }
    return dataset;
}

RegressionDataset to_regression(const MatchedDataset& dataset) {
    RegressionDataset out;
    for (const CalibrationSample& s : dataset.samples) {
        if (!s.matched || !s.gt_box || !s.box_variances) continue;
        RegressionSample r;
        r.mean.resize(4);
        r.var.resize(4);
        r.gt.resize(4);
        r.mean << s.box.cx, s.box.cy, s.box.w, s.box.h;
        r.var << (*s.box_variances)[0], (*s.box_variances)[1], (*s.box_variances)[2],
            (*s.box_variances)[3];
        r.gt << s.gt_box->cx, s.gt_box->cy, s.gt_box->w, s.gt_box->h;
        out.samples.push_back(std::move(r));
    }
    return out;
}

std::vector<Frame> generate_tracking_sequence(const ScenarioConfig& config,
                                              const DetectorDistortion& distortion,
                                              std::uint64_t seed) {
    if (config.objects < 1 || config.frames < 1)
        throw std::invalid_argument("scenario must have objects and frames");
    Rng init_rng(seed, 0x7c1fULL);

    struct Object {
        double cx, cy, vx, vy, w, h;
    };
    std::vector<Object> objects(static_cast<std::size_t>(config.objects));
    for (Object& o : objects) {
        o.cx = init_rng.uniform(0.2, 0.8);
        o.cy = init_rng.uniform(0.2, 0.8);
        o.vx = init_rng.uniform(-0.004, 0.004);
        o.vy = init_rng.uniform(-0.004, 0.004);
        o.w = init_rng.uniform(0.06, 0.15);
        o.h = init_rng.uniform(0.06, 0.15);
    }

    const double rep_var = config.noise_sigma * config.noise_sigma;
    std::vector<Frame> frames(static_cast<std::size_t>(config.frames));
    std::int64_t next_detection_id = 1;

    for (int f = 0; f < config.frames; ++f) {
        Rng rng = init_rng.substream(static_cast<std::uint64_t>(f) + 1);
        Frame& frame = frames[static_cast<std::size_t>(f)];

        for (std::size_t oi = 0; oi < objects.size(); ++oi) {
            Object& o = objects[oi];
            if (f > 0) {
                o.cx += o.vx + rng.normal(0.0, config.jitter_sigma);
                o.cy += o.vy + rng.normal(0.0, config.jitter_sigma);
                o.cx = std::clamp(o.cx, 0.05, 0.95);
                o.cy = std::clamp(o.cy, 0.05, 0.95);
            }
            GroundTruthObject gt;
            gt.label = 0;
            gt.box = BoundingBox{o.cx, o.cy, o.w, o.h};
            gt.frame_id = f;
            gt.object_id = static_cast<std::int64_t>(oi) + 1;
            frame.ground_truths.push_back(gt);

            if (!rng.bernoulli(config.detection_probability)) continue;
            Detection det;
            det.label = 0;
            det.frame_id = f;
            det.detection_id = next_detection_id++;
            double noise_std = distortion.variance_scale * config.noise_sigma;
            det.box = gt.box;
            det.box.cx += draw_noise(&rng, distortion, noise_std);
            det.box.cy += draw_noise(&rng, distortion, noise_std);
            det.box.w = std::max(det.box.w + draw_noise(&rng, distortion, noise_std), 1e-3);
            det.box.h = std::max(det.box.h + draw_noise(&rng, distortion, noise_std), 1e-3);
            det.box_variances = {rep_var, rep_var, rep_var, rep_var};
            det.confidence = rng.uniform(config.tp_confidence_lo, config.tp_confidence_hi);
            frame.detections.push_back(det);
        }

        int n_fp = config.false_positives_per_frame > 0.0
                       ? rng.poisson(config.false_positives_per_frame)
                       : 0;
        for (int k = 0; k < n_fp; ++k) {
            Detection det;
            det.label = 0;
            det.frame_id = f;
            det.detection_id = next_detection_id++;
            det.box.cx = rng.uniform(0.05, 0.95);
            det.box.cy = rng.uniform(0.05, 0.95);
            det.box.w = rng.uniform(0.05, 0.15);
            det.box.h = rng.uniform(0.05, 0.15);
            det.box_variances = {rep_var, rep_var, rep_var, rep_var};
            det.confidence = rng.uniform(config.fp_confidence_lo, config.fp_confidence_hi);
            frame.detections.push_back(det);
        }
    }
    return frames;
}

}  // namespace ct
