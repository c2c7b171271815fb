#include "dmap/augment.hpp"

#include <cmath>
#include <numeric>
#include <utility>

#include "dmap/rng.hpp"

namespace dmap {

CropStrategy CropStrategy::random(double ratio, std::uint64_t seed) {
    CropStrategy s;
    s.kind = CropKind::random;
    s.ratio = ratio;
    s.seed = seed;
    s.validate();
    return s;
}

CropStrategy CropStrategy::fixed_quarters() {
    CropStrategy s;
    s.kind = CropKind::fixed_quarters;
    return s;
}

CropStrategy CropStrategy::fixed_plus_random(double ratio, int extra_count,
                                             std::uint64_t seed) {
    CropStrategy s;
    s.kind = CropKind::fixed_plus_random;
    s.ratio = ratio;
    s.extra_count = extra_count;
    s.seed = seed;
    s.validate();
    return s;
}

CropStrategy CropStrategy::mixed(std::uint64_t seed) {
    CropStrategy s;
    s.kind = CropKind::mixed;
    s.seed = seed;
    return s;
}

void CropStrategy::validate() const {
    const auto check_ratio = [](double r) {
        if (!(r > 0.0) || r > 1.0 || !std::isfinite(r))
            throw InvalidParameter("crop ratio must lie in (0, 1]");
    };
    switch (kind) {
        case CropKind::random:
            check_ratio(ratio);
            break;
        case CropKind::fixed_quarters:
            break;
        case CropKind::fixed_plus_random:
            check_ratio(ratio);
            if (extra_count < 0)
                throw InvalidParameter("extra_count must be >= 0");
            break;
        case CropKind::mixed:
            if (ratio_set.empty())
                throw InvalidParameter("mixed strategy needs a non-empty ratio set");
            for (double r : ratio_set) check_ratio(r);
            break;
    }
}

namespace {

CropRect random_rect(int width, int height, double ratio, Rng& rng) {
    const int rw = static_cast<int>(std::floor(ratio * width));
    const int rh = static_cast<int>(std::floor(ratio * height));
    if (rw < 1 || rh < 1)
        throw InvalidParameter("crop ratio yields a zero-size rectangle");
    const int ox = static_cast<int>(rng.uniform_int(0, width - rw));
    const int oy = static_cast<int>(rng.uniform_int(0, height - rh));
    return {ox, oy, rw, rh};
}

}  // namespace

std::vector<CropRect> plan_crops(int width, int height, const CropStrategy& strategy) {
    strategy.validate();
    if (width < 1 || height < 1)
        throw InvalidParameter("frame must have positive area");
    const bool quarters = strategy.kind == CropKind::fixed_quarters ||
                          strategy.kind == CropKind::fixed_plus_random;
    if (quarters && (width < 2 || height < 2))
        throw InvalidParameter("quarter strategies need at least a 2x2 frame");

    Rng rng(strategy.seed);
    std::vector<CropRect> rects;
    switch (strategy.kind) {
        case CropKind::random:
            rects.push_back(random_rect(width, height, strategy.ratio, rng));
            break;
        case CropKind::fixed_quarters: {
            const auto q = split_quarters(width, height);
            rects.assign(q.begin(), q.end());
            break;
        }
        case CropKind::fixed_plus_random: {
            const auto q = split_quarters(width, height);
            rects.assign(q.begin(), q.end());
            for (int i = 0; i < strategy.extra_count; ++i)
                rects.push_back(random_rect(width, height, strategy.ratio, rng));
            break;
        }
        case CropKind::mixed: {
            const auto idx = static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<std::int64_t>(strategy.ratio_set.size()) - 1));
            rects.push_back(random_rect(width, height, strategy.ratio_set[idx], rng));
            break;
        }
    }
    return rects;
}

namespace {

void check_rect(const CropRect& r, int width, int height) {
    if (r.w < 1 || r.h < 1 || r.x < 0 || r.y < 0 || r.x + r.w > width ||
        r.y + r.h > height)
        throw BoundsError("crop rectangle falls outside the frame");
}

}  // namespace

DensityMap crop_map(const DensityMap& map, const CropRect& rect) {
    check_rect(rect, map.width(), map.height());
    std::vector<double> out(static_cast<std::size_t>(rect.w) * rect.h);
    for (int y = 0; y < rect.h; ++y)
        for (int x = 0; x < rect.w; ++x)
            out[static_cast<std::size_t>(y) * rect.w + x] = map.at(rect.x + x, rect.y + y);
    return DensityMap(rect.w, rect.h, std::move(out));
}

AnnotationSet crop_annotations(const AnnotationSet& ann, const CropRect& rect) {
    ann.validate();
    check_rect(rect, ann.width, ann.height);
    AnnotationSet out;
    out.width = rect.w;
    out.height = rect.h;
    for (const Point2d& p : ann.points) {
        if (p.x >= rect.x && p.x < rect.x + rect.w && p.y >= rect.y &&
            p.y < rect.y + rect.h)
            out.points.push_back({p.x - rect.x, p.y - rect.y});
    }
    return out;
}

std::array<CropRect, 4> split_quarters(int width, int height) {
    if (width < 2 || height < 2)
        throw InvalidParameter("cannot split a frame smaller than 2x2 into quarters");
    const int hw = width / 2, hh = height / 2;
    return {{{0, 0, hw, hh},
             {hw, 0, width - hw, hh},
             {0, hh, hw, height - hh},
             {hw, hh, width - hw, height - hh}}};
}

double aggregate_patch_counts(const std::vector<double>& counts) {
    return std::accumulate(counts.begin(), counts.end(), 0.0);
}

}  // namespace dmap
