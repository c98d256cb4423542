#include "confidence_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "stats.hpp"

namespace ct {

double feature_value(const CalibrationSample& sample, BoxFeature feature) {
    switch (feature) {
        case BoxFeature::Confidence: return sample.confidence;
        case BoxFeature::Cx: return sample.box.cx;
        case BoxFeature::Cy: return sample.box.cy;
        case BoxFeature::W: return sample.box.w;
        case BoxFeature::H: return sample.box.h;
    }
    return 0.0;
}

BinningScheme BinningScheme::uniform(std::size_t dims, int bins, int min_samples) {
    BinningScheme scheme;
    scheme.bins_per_dim.assign(dims, bins);
    scheme.ranges.assign(dims, {0.0, 1.0});
    scheme.min_samples_per_bin = min_samples;
    return scheme;
}

int BinningScheme::total_bins() const {
    int total = 1;
    for (int b : bins_per_dim) total *= b;
    return total;
}

int BinningScheme::bin_of(double value, std::size_t dim) const {
    auto [lo, hi] = ranges[dim];
    int bins = bins_per_dim[dim];
    double t = (value - lo) / (hi - lo);
    int idx = static_cast<int>(t * bins);
    return std::clamp(idx, 0, bins - 1);
}

int BinningScheme::flat_index(const CalibrationSample& sample,
                              const FeatureSet& features) const {
    int flat = 0;
    for (std::size_t d = 0; d < features.size(); ++d) {
        flat = flat * bins_per_dim[d] + bin_of(feature_value(sample, features[d]), d);
    }
    return flat;
}

namespace {

struct BinStats {
    std::size_t count = 0;
    double conf_sum = 0.0;
    double match_sum = 0.0;
    double cx_sum = 0.0, cy_sum = 0.0, w_sum = 0.0, h_sum = 0.0;
};

std::map<int, BinStats> accumulate(const MatchedDataset& dataset,
                                   const FeatureSet& features,
                                   const BinningScheme& scheme) {
    std::map<int, BinStats> bins;
    for (const CalibrationSample& s : dataset.samples) {
        BinStats& b = bins[scheme.flat_index(s, features)];
        b.count += 1;
        b.conf_sum += s.confidence;
        b.match_sum += s.matched ? 1.0 : 0.0;
        b.cx_sum += s.box.cx;
        b.cy_sum += s.box.cy;
        b.w_sum += s.box.w;
        b.h_sum += s.box.h;
    }
    return bins;
}

void require_samples(const MatchedDataset& dataset) {
    if (dataset.samples.empty()) throw std::invalid_argument("no samples");
}

}  // namespace

double ece(const MatchedDataset& dataset, int bins) {
    require_samples(dataset);
    FeatureSet features{BoxFeature::Confidence};
    return dece(dataset, features, BinningScheme::uniform(1, bins));
}

double dece(const MatchedDataset& dataset, const FeatureSet& features,
            const BinningScheme& scheme) {
    require_samples(dataset);
    auto bins = accumulate(dataset, features, scheme);
    double mass = 0.0, weighted = 0.0;
    for (const auto& [idx, b] : bins) {
        if (static_cast<int>(b.count) < scheme.min_samples_per_bin) continue;
        double n = static_cast<double>(b.count);
        weighted += n * std::fabs(b.match_sum / n - b.conf_sum / n);
        mass += n;
    }
    if (mass == 0.0) throw std::invalid_argument("insufficient density");
    return weighted / mass;
}

double mce(const MatchedDataset& dataset, int bins) {
    require_samples(dataset);
    FeatureSet features{BoxFeature::Confidence};
    auto scheme = BinningScheme::uniform(1, bins);
    auto stats = accumulate(dataset, features, scheme);
    double worst = 0.0;
    for (const auto& [idx, b] : stats) {
        double n = static_cast<double>(b.count);
        worst = std::max(worst, std::fabs(b.match_sum / n - b.conf_sum / n));
    }
    return worst;
}

double brier(const MatchedDataset& dataset) {
    require_samples(dataset);
    double sum = 0.0;
    for (const CalibrationSample& s : dataset.samples) {
        double d = s.confidence - (s.matched ? 1.0 : 0.0);
        sum += d * d;
    }
    return sum / static_cast<double>(dataset.samples.size());
}

double nll_bernoulli(const MatchedDataset& dataset, double eps) {
    require_samples(dataset);
    double sum = 0.0;
    for (const CalibrationSample& s : dataset.samples) {
        double p = stats::clamp01(s.confidence, eps);
        sum -= s.matched ? std::log(p) : std::log(1.0 - p);
    }
    return sum / static_cast<double>(dataset.samples.size());
}

double auprc(const MatchedDataset& dataset) {
    require_samples(dataset);
    std::vector<std::size_t> order(dataset.samples.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        return dataset.samples[i].confidence > dataset.samples[j].confidence;
    });

    double total_pos = 0.0;
    for (const CalibrationSample& s : dataset.samples) total_pos += s.matched ? 1.0 : 0.0;
    if (total_pos == 0.0) return 0.0;

    // Trapezoid over the precision-recall sweep; ties in confidence are
    // processed as one group.
    double tp = 0.0, fp = 0.0;
    double prev_recall = 0.0, prev_precision = 1.0;
    double area = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        double conf = dataset.samples[order[i]].confidence;
        while (j < order.size() && dataset.samples[order[j]].confidence == conf) {
            if (dataset.samples[order[j]].matched) {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            ++j;
        }
        double recall = tp / total_pos;
        double precision = tp / (tp + fp);
        area += (recall - prev_recall) * 0.5 * (precision + prev_precision);
        prev_recall = recall;
        prev_precision = precision;
        i = j;
    }
    return area;
}

std::vector<ReliabilityBin> reliability(const MatchedDataset& dataset,
                                        const FeatureSet& features,
                                        const BinningScheme& scheme) {
    require_samples(dataset);
    auto stats = accumulate(dataset, features, scheme);
    std::vector<ReliabilityBin> out;
    for (const auto& [flat, b] : stats) {
        ReliabilityBin rb;
        int rest = flat;
        rb.index.assign(features.size(), 0);
        for (std::size_t d = features.size(); d-- > 0;) {
            rb.index[d] = rest % scheme.bins_per_dim[d];
            rest /= scheme.bins_per_dim[d];
        }
        double n = static_cast<double>(b.count);
        rb.count = b.count;
        rb.mean_confidence = b.conf_sum / n;
        rb.precision = b.match_sum / n;
        rb.mean_cx = b.cx_sum / n;
        rb.mean_cy = b.cy_sum / n;
        rb.mean_w = b.w_sum / n;
        rb.mean_h = b.h_sum / n;
        out.push_back(std::move(rb));
    }
    return out;
}

std::string reliability_csv(const std::vector<ReliabilityBin>& bins) {
    std::ostringstream os;
    os << "bin_index,count,mean_conf,precision,mean_cx,mean_cy,mean_w,mean_h\n";
    for (const ReliabilityBin& b : bins) {
        for (std::size_t d = 0; d < b.index.size(); ++d) {
            os << (d ? "|" : "") << b.index[d];
        }
        os << ',' << b.count << ',' << b.mean_confidence << ',' << b.precision << ','
           << b.mean_cx << ',' << b.mean_cy << ',' << b.mean_w << ',' << b.mean_h << '\n';
    }
    return os.str();
}

}  // namespace ct
