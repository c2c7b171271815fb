#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "dmap/grid.hpp"

namespace dmap {

// Axis-aligned crop window; always fully inside its frame.
struct CropRect {
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;
};

enum class CropKind { random, fixed_quarters, fixed_plus_random, mixed };

struct CropStrategy {
    CropKind kind = CropKind::random;
    double ratio = 0.5;                                   // random / fixed_plus_random
    int extra_count = 5;                                  // fixed_plus_random
    std::vector<double> ratio_set = {0.3, 0.4, 0.5, 0.6, 0.7};  // mixed
    std::uint64_t seed = 0;

    static CropStrategy random(double ratio, std::uint64_t seed = 0);
    static CropStrategy fixed_quarters();
    static CropStrategy fixed_plus_random(double ratio = 0.5, int extra_count = 5,
                                          std::uint64_t seed = 0);
    static CropStrategy mixed(std::uint64_t seed = 0);

    void validate() const;
};

// Crop plan for one frame; deterministic in (dimensions, strategy, seed).
std::vector<CropRect> plan_crops(int width, int height, const CropStrategy& strategy);

DensityMap crop_map(const DensityMap& map, const CropRect& rect);

// Points inside the rect are kept and rebased to the rect origin.
AnnotationSet crop_annotations(const AnnotationSet& ann, const CropRect& rect);

// Exact tiling into 4 quarters (top-left, top-right, bottom-left,
// bottom-right); odd rows/columns go to the bottom/right quarters.
std::array<CropRect, 4> split_quarters(int width, int height);

// Sum of per-patch counts, the validate-by-patch count estimate.
double aggregate_patch_counts(const std::vector<double>& counts);

}  // namespace dmap
