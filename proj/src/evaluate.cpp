#include "dmap/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dmap {

void EvalConfig::validate() const {
    if (deltas.empty()) throw InvalidParameter("at least one delta is required");
    for (int d : deltas)
        if (d < 1) throw InvalidParameter("delta must be >= 1");
    if (!(iou_threshold > 0.0) || iou_threshold > 1.0)
        throw InvalidParameter("iou_threshold must lie in (0, 1]");
}

double window_iou(const Point2d& p, const Point2d& q, double delta) {
    const double ox = std::max(0.0, delta - std::abs(p.x - q.x));
    const double oy = std::max(0.0, delta - std::abs(p.y - q.y));
    const double inter = ox * oy;
    const double uni = 2.0 * delta * delta - inter;
    return inter / uni;
}

std::vector<MatchReport> match_and_ap(const LocalizationResult& result,
                                      const AnnotationSet& gt,
                                      const EvalConfig& cfg) {
    cfg.validate();
    gt.validate();

    // Rank by descending mass; ties by lower x, then lower y.
    std::vector<Center> ranked(result.centers);
    std::sort(ranked.begin(), ranked.end(), [](const Center& a, const Center& b) {
        if (a.mass != b.mass) return a.mass > b.mass;
        if (a.x != b.x) return a.x < b.x;
        return a.y < b.y;
    });

    const std::size_t n_gt = gt.points.size();
    std::vector<MatchReport> reports;
    reports.reserve(cfg.deltas.size());
    for (int delta : cfg.deltas) {
        MatchReport report;
        report.delta = delta;
        if (n_gt == 0) {
            report.ap = ranked.empty() ? 1.0 : 0.0;
            for (std::size_t k = 0; k < ranked.size(); ++k) {
                report.outcomes.push_back({false, -1});
                report.precision_recall.push_back({0.0, 0.0});
            }
            reports.push_back(std::move(report));
            continue;
        }

        std::vector<char> consumed(n_gt, 0);
        long long tp = 0;
        double ap_sum = 0.0;
        for (std::size_t k = 0; k < ranked.size(); ++k) {
            // Nearest unconsumed ground-truth point; ties by lower gt index.
            int match = -1;
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t g = 0; g < n_gt; ++g) {
                if (consumed[g]) continue;
                const double dx = ranked[k].x - gt.points[g].x;
                const double dy = ranked[k].y - gt.points[g].y;
                const double d = dx * dx + dy * dy;
                if (d < best) {
                    best = d;
                    match = static_cast<int>(g);
                }
            }
            PredictionOutcome outcome;
            if (match >= 0 &&
                window_iou({ranked[k].x, ranked[k].y}, gt.points[match],
                           static_cast<double>(delta)) >= cfg.iou_threshold) {
                consumed[match] = 1;
                ++tp;
                ap_sum += static_cast<double>(tp) / static_cast<double>(k + 1);
                outcome = {true, match};
            } else {
                outcome = {false, -1};
            }
            report.outcomes.push_back(outcome);
            report.precision_recall.push_back(
                {static_cast<double>(tp) / static_cast<double>(k + 1),
                 static_cast<double>(tp) / static_cast<double>(n_gt)});
        }
        report.ap = ap_sum / static_cast<double>(n_gt);
        reports.push_back(std::move(report));
    }
    return reports;
}

CountingMetrics counting_metrics(const std::vector<std::pair<double, double>>& pairs) {
    if (pairs.empty())
        throw InvalidParameter("counting metrics need at least one pair");
    double abs_sum = 0.0, sq_sum = 0.0;
    for (const auto& [est, truth] : pairs) {
        const double d = est - truth;
        abs_sum += std::abs(d);
        sq_sum += d * d;
    }
    const double n = static_cast<double>(pairs.size());
    return {abs_sum / n, std::sqrt(sq_sum / n)};
}

}  // namespace dmap
