#include "dmap/gt_gen.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "dmap/rng.hpp"

namespace dmap {

SigmaPolicy SigmaPolicy::fixed(double sigma) {
    SigmaPolicy p;
    p.mode = SigmaMode::fixed;
    p.fixed_sigma = sigma;
    p.validate();
    return p;
}

SigmaPolicy SigmaPolicy::adaptive(double beta, int k, double fallback) {
    SigmaPolicy p;
    p.mode = SigmaMode::adaptive;
    p.beta = beta;
    p.k_neighbors = k;
    p.fallback_sigma = fallback;
    p.validate();
    return p;
}

void SigmaPolicy::validate() const {
    if (!(fixed_sigma > 0.0) || !std::isfinite(fixed_sigma))
        throw InvalidParameter("fixed_sigma must be positive");
    if (!(beta > 0.0) || !std::isfinite(beta))
        throw InvalidParameter("beta must be positive");
    if (k_neighbors < 1)
        throw InvalidParameter("k_neighbors must be >= 1");
    if (!(fallback_sigma > 0.0) || !std::isfinite(fallback_sigma))
        throw InvalidParameter("fallback_sigma must be positive");
}

AttentionMap::AttentionMap(int width, int height, std::vector<double> values)
    : width_(width), height_(height), values_(std::move(values)) {
    if (width_ < 1 || height_ < 1)
        throw ValidationError("attention map must have positive dimensions");
    if (values_.size() != static_cast<std::size_t>(width_) * height_)
        throw ValidationError("value count does not match width*height");
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i]) || values_[i] < 0.0 || values_[i] > 1.0)
            throw ValidationError("attention value must be in [0, 1]",
                                  static_cast<std::int64_t>(i));
    }
}

std::vector<double> adaptive_sigmas(const AnnotationSet& ann, const SigmaPolicy& policy) {
    policy.validate();
    if (policy.mode != SigmaMode::adaptive)
        throw InvalidParameter("adaptive_sigmas requires an adaptive policy");
    ann.validate();

    const std::size_t n = ann.points.size();
    const std::size_t k = static_cast<std::size_t>(policy.k_neighbors);
    std::vector<double> sigmas(n);
    std::vector<std::pair<double, std::size_t>> dist;  // (squared distance, index)
    dist.reserve(n);
    for (std::size_t j = 0; j < n; ++j) {
        if (n - 1 < k) {
            sigmas[j] = policy.fallback_sigma;
            continue;
        }
        dist.clear();
        for (std::size_t i = 0; i < n; ++i) {
            if (i == j) continue;
            const double dx = ann.points[i].x - ann.points[j].x;
            const double dy = ann.points[i].y - ann.points[j].y;
            dist.emplace_back(dx * dx + dy * dy, i);
        }
        std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
        double mean = 0.0;
        for (std::size_t t = 0; t < k; ++t) mean += std::sqrt(dist[t].first);
        mean /= static_cast<double>(k);
        sigmas[j] = policy.beta * mean;
    }
    return sigmas;
}

DensityMap generate_density_map(const AnnotationSet& ann, const SigmaPolicy& policy) {
    policy.validate();
    ann.validate();
    const int w = ann.width;
    const int h = ann.height;
    std::vector<double> values(static_cast<std::size_t>(w) * h, 0.0);

    std::vector<double> sigmas;
    if (policy.mode == SigmaMode::adaptive) {
        sigmas = adaptive_sigmas(ann, policy);
    } else {
        sigmas.assign(ann.points.size(), policy.fixed_sigma);
    }

    std::vector<double> ex, ey;
    for (std::size_t j = 0; j < ann.points.size(); ++j) {
        const double s = sigmas[j];
        const int cx = std::clamp<long>(std::lround(ann.points[j].x), 0, w - 1);
        const int cy = std::clamp<long>(std::lround(ann.points[j].y), 0, h - 1);
        if (!(s > 0.0)) {
            // Coincident annotations can drive an adaptive sigma to zero;
            // the kernel degenerates to a unit point mass.
            values[static_cast<std::size_t>(cy) * w + cx] += 1.0;
            continue;
        }
        const long r = static_cast<long>(std::ceil(3.0 * s));
        const int x0 = static_cast<int>(std::max<long>(0, cx - r));
        const int x1 = static_cast<int>(std::min<long>(w - 1, cx + r));
        const int y0 = static_cast<int>(std::max<long>(0, cy - r));
        const int y1 = static_cast<int>(std::min<long>(h - 1, cy + r));

        const double inv2s2 = 1.0 / (2.0 * s * s);
        ex.assign(static_cast<std::size_t>(x1 - x0 + 1), 0.0);
        ey.assign(static_cast<std::size_t>(y1 - y0 + 1), 0.0);
        double sumx = 0.0, sumy = 0.0;
        for (int x = x0; x <= x1; ++x) {
            const double d = x - cx;
            sumx += ex[x - x0] = std::exp(-d * d * inv2s2);
        }
        for (int y = y0; y <= y1; ++y) {
            const double d = y - cy;
            sumy += ey[y - y0] = std::exp(-d * d * inv2s2);
        }
        // The clipped support is a rectangle, so the 2-D normalizer factors.
        const double inv = 1.0 / (sumx * sumy);
        for (int y = y0; y <= y1; ++y) {
            double* row = values.data() + static_cast<std::size_t>(y) * w;
            const double wy = ey[y - y0] * inv;
            for (int x = x0; x <= x1; ++x) row[x] += ex[x - x0] * wy;
        }
    }
    return DensityMap(w, h, std::move(values));
}

AttentionMap generate_attention_window(const AnnotationSet& ann, int window) {
    if (window < 1 || window % 2 == 0)
        throw InvalidParameter("attention window must be an odd positive integer");
    ann.validate();
    const int w = ann.width;
    const int h = ann.height;
    const int r = window / 2;
    std::vector<double> values(static_cast<std::size_t>(w) * h, 0.0);
    for (const Point2d& p : ann.points) {
        const int cx = std::clamp<long>(std::lround(p.x), 0, w - 1);
        const int cy = std::clamp<long>(std::lround(p.y), 0, h - 1);
        const int x0 = std::max(0, cx - r), x1 = std::min(w - 1, cx + r);
        const int y0 = std::max(0, cy - r), y1 = std::min(h - 1, cy + r);
        for (int y = y0; y <= y1; ++y)
            std::fill(values.begin() + static_cast<std::size_t>(y) * w + x0,
                      values.begin() + static_cast<std::size_t>(y) * w + x1 + 1, 1.0);
    }
    return AttentionMap(w, h, std::move(values));
}

AttentionMap generate_attention_threshold(const DensityMap& map, double quantile) {
    if (!(quantile > 0.0) || !(quantile < 1.0))
        throw InvalidParameter("quantile must lie in (0, 1)");
    // Nearest-rank quantile: the ceil(q*N)-th smallest value.
    std::vector<double> sorted(map.values());
    const std::size_t n = sorted.size();
    std::size_t rank = static_cast<std::size_t>(
        std::ceil(quantile * static_cast<double>(n)));
    rank = std::clamp<std::size_t>(rank, 1, n);
    std::nth_element(sorted.begin(), sorted.begin() + (rank - 1), sorted.end());
    const double threshold = sorted[rank - 1];

    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i)
        values[i] = map.values()[i] > threshold ? 1.0 : 0.0;
    return AttentionMap(map.width(), map.height(), std::move(values));
}

void SceneConfig::validate() const {
    if (width < 1 || height < 1)
        throw InvalidParameter("scene frame must have positive area");
    if (min_heads < 0 || max_heads < min_heads)
        throw InvalidParameter("head count range requires 0 <= min <= max");
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma))
        throw InvalidParameter("noise_sigma must be >= 0");
    if (placement == Placement::gaussian_mixture && mixture_components < 1)
        throw InvalidParameter("gaussian mixture needs at least one component");
    sigma_policy.validate();
}

SynthScene synth_scene(const SceneConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);

    const double w = cfg.width;
    const double h = cfg.height;
    const double max_x = std::nextafter(w, 0.0);
    const double max_y = std::nextafter(h, 0.0);
    const int n = static_cast<int>(rng.uniform_int(cfg.min_heads, cfg.max_heads));

    AnnotationSet ann;
    ann.width = cfg.width;
    ann.height = cfg.height;
    ann.points.reserve(static_cast<std::size_t>(n));

    if (cfg.placement == Placement::uniform) {
        for (int i = 0; i < n; ++i)
            ann.points.push_back({rng.next_double() * w, rng.next_double() * h});
    } else {
        struct Component { double cx, cy, spread; };
        std::vector<Component> comps(static_cast<std::size_t>(cfg.mixture_components));
        const double lo = std::min(w, h) / 20.0, hi = std::min(w, h) / 8.0;
        for (Component& c : comps) {
            c.cx = rng.next_double() * w;
            c.cy = rng.next_double() * h;
            c.spread = lo + rng.next_double() * (hi - lo);
        }
        for (int i = 0; i < n; ++i) {
            const Component& c =
                comps[static_cast<std::size_t>(rng.uniform_int(0, cfg.mixture_components - 1))];
            double x = 0.0, y = 0.0;
            bool inside = false;
            for (int tries = 0; tries < 32 && !inside; ++tries) {
                x = c.cx + rng.normal() * c.spread;
                y = c.cy + rng.normal() * c.spread;
                inside = x >= 0.0 && x < w && y >= 0.0 && y < h;
            }
            if (!inside) {
                x = std::clamp(x, 0.0, max_x);
                y = std::clamp(y, 0.0, max_y);
            }
            ann.points.push_back({x, y});
        }
    }

    DensityMap clean = generate_density_map(ann, cfg.sigma_policy);
    if (cfg.noise_sigma == 0.0)
        return {std::move(ann), clean, clean};

    std::vector<double> noisy(clean.values());
    for (double& v : noisy)
        v = std::max(0.0, v + cfg.noise_sigma * rng.normal());
    DensityMap noisy_map(cfg.width, cfg.height, std::move(noisy));
    return {std::move(ann), std::move(clean), std::move(noisy_map)};
}

}  // namespace dmap
