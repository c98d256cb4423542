#pragma once

#include <string>
#include <vector>

#include "core_model.hpp"

namespace ct {

// Features usable for multidimensional calibration binning. Confidence is
// always in [0,1]; box features must be normalized to [0,1] before use.
enum class BoxFeature { Confidence, Cx, Cy, W, H };

using FeatureSet = std::vector<BoxFeature>;

double feature_value(const CalibrationSample& sample, BoxFeature feature);

struct BinningScheme {
    std::vector<int> bins_per_dim;                 // one entry per feature
    std::vector<std::pair<double, double>> ranges; // defaults to [0,1] per dim
    int min_samples_per_bin = 0;

    static BinningScheme uniform(std::size_t dims, int bins, int min_samples = 0);
    int total_bins() const;
    // Half-open bins [lo, hi), final bin closed so 1.0 lands in the top bin.
    int bin_of(double value, std::size_t dim) const;
    int flat_index(const CalibrationSample& sample, const FeatureSet& features) const;
};

struct ReliabilityBin {
    std::vector<int> index;     // per-dimension bin index
    std::size_t count = 0;
    double mean_confidence = 0.0;
    double precision = 0.0;
    double mean_cx = 0.0, mean_cy = 0.0, mean_w = 0.0, mean_h = 0.0;
};

double ece(const MatchedDataset& dataset, int bins = 20);

// Multidimensional detection ECE. Bins with fewer than
// scheme.min_samples_per_bin samples are excluded and the remaining mass
// renormalized.
double dece(const MatchedDataset& dataset, const FeatureSet& features,
            const BinningScheme& scheme);

double mce(const MatchedDataset& dataset, int bins);

double brier(const MatchedDataset& dataset);

double nll_bernoulli(const MatchedDataset& dataset, double eps = 1e-7);

double auprc(const MatchedDataset& dataset);

std::vector<ReliabilityBin> reliability(const MatchedDataset& dataset,
                                        const FeatureSet& features,
                                        const BinningScheme& scheme);

std::string reliability_csv(const std::vector<ReliabilityBin>& bins);

}  // namespace ct
