#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "specstat/core/types.hpp"
#include "specstat/parallel.hpp"

namespace specstat::evalmetrics {

// 2 |A n B| / (|A| + |B|); both masks empty scores 1 by convention.
double dice(const core::LabelMap& a, const core::LabelMap& b);

// Symmetric Hausdorff distance in pixels (Euclidean, exact maximum), computed
// with two exact distance transforms. Conventions: both empty -> 0, exactly
// one empty -> the image diagonal. percentile < 100 gives the percentile
// variant (e.g. 95 for HD95).
double hausdorff(const core::LabelMap& a, const core::LabelMap& b, double percentile = 100.0,
                 Exec exec = Exec::Parallel);

// Exact squared Euclidean distance transform to the nearest set pixel
// (Felzenszwalb-Huttenlocher lower-envelope method). Exposed for the fast-path
// vs brute-force equivalence checks.
std::vector<double> squared_distance_transform(const core::LabelMap& mask,
                                               Exec exec = Exec::Parallel);

struct ScanClassMetric {
    std::string scan;
    core::ClassId cls = core::ClassId::Background;
    double dice = 0.0;
    double hausdorff = 0.0;
};

struct Aggregate {
    double mean = 0.0;
    double min = 0.0;
    double max = 0.0;
};

struct ClassSummary {
    Aggregate dice;
    Aggregate hausdorff;
    std::size_t n = 0;
};

// Mean/min/max over scans, per class and pooled over all (scan, class) pairs.
struct MetricsSummary {
    std::vector<std::pair<core::ClassId, ClassSummary>> per_class;
    ClassSummary pooled;
    std::size_t n_scans = 0;
};

MetricsSummary summarize(const std::vector<ScanClassMetric>& rows);

nlohmann::json to_json(const MetricsSummary& summary);

} // namespace specstat::evalmetrics
