#pragma once

#include "confidence_metrics.hpp"
#include "core_model.hpp"

namespace ct {

// Histogram Binning over the (possibly multidimensional) feature grid.
// Each cell stores the empirical precision of its training samples; empty
// cells fall back to the global positive rate.
struct HistogramBinningModel {
    BinningScheme scheme;
    FeatureSet features;
    std::vector<double> theta;   // one entry per grid cell, NaN -> fallback
    double fallback = 0.0;

    double transform(const CalibrationSample& sample) const;
};

HistogramBinningModel fit_histogram(const MatchedDataset& dataset,
                                    const FeatureSet& features,
                                    const BinningScheme& scheme,
                                    bool add_one_smoothing = false);

}  // namespace ct
