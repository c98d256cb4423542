#include "binning_calibration.hpp"

#include <cmath>
#include <stdexcept>

namespace ct {

HistogramBinningModel fit_histogram(const MatchedDataset& dataset,
                                    const FeatureSet& features,
                                    const BinningScheme& scheme,
                                    bool add_one_smoothing) {
    if (dataset.samples.empty()) throw std::invalid_argument("no samples");

    HistogramBinningModel model;
    model.scheme = scheme;
    model.features = features;

    std::vector<double> count(scheme.total_bins(), 0.0);
    std::vector<double> pos(scheme.total_bins(), 0.0);
    double total_pos = 0.0;
    for (const CalibrationSample& s : dataset.samples) {
        int idx = scheme.flat_index(s, features);
        count[idx] += 1.0;
        if (s.matched) {
            pos[idx] += 1.0;
            total_pos += 1.0;
        }
    }
    model.fallback = total_pos / static_cast<double>(dataset.samples.size());
    model.theta.assign(count.size(), std::nan(""));
    for (std::size_t i = 0; i < count.size(); ++i) {
        if (count[i] > 0.0) {
            model.theta[i] = add_one_smoothing ? (pos[i] + 1.0) / (count[i] + 2.0)
                                               : pos[i] / count[i];
        }
    }
    return model;
}

double HistogramBinningModel::transform(const CalibrationSample& sample) const {
    double t = theta[scheme.flat_index(sample, features)];
    return std::isnan(t) ? fallback : t;
}

}  // namespace ct
