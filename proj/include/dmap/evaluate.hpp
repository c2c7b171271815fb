#pragma once

#include <utility>
#include <vector>

#include "dmap/grid.hpp"
#include "dmap/localize.hpp"

namespace dmap {

struct EvalConfig {
    std::vector<int> deltas = {10, 20, 40};
    double iou_threshold = 0.5;

    void validate() const;
};

struct PredictionOutcome {
    bool tp = false;
    int gt_index = -1;  // matched ground-truth point for TPs
};

// Matching outcome for one window size delta.
struct MatchReport {
    int delta = 0;
    std::vector<PredictionOutcome> outcomes;                 // in rank order
    std::vector<std::pair<double, double>> precision_recall;  // per rank
    double ap = 0.0;
};

// Intersection-over-union of the two axis-aligned delta x delta squares
// centered at p and q (continuous geometry, no frame clipping).
double window_iou(const Point2d& p, const Point2d& q, double delta);

// Mass-ranked greedy matching of predicted centers against ground truth;
// one report per delta. Each ground-truth point can be consumed by at most
// one true positive.
std::vector<MatchReport> match_and_ap(const LocalizationResult& result,
                                      const AnnotationSet& gt,
                                      const EvalConfig& cfg = {});

struct CountingMetrics {
    double mae = 0.0;
    double rmse = 0.0;
};

// pairs = (estimated count, true count) per image.
CountingMetrics counting_metrics(const std::vector<std::pair<double, double>>& pairs);

}  // namespace dmap
