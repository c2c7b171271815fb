#pragma once

#include <cstdint>
#include <vector>

#include "dmap/grid.hpp"

namespace dmap {

// Pixel coordinate with an integer frequency; equivalent to replicating
// the coordinate `weight` times. `source_density` keeps the pixel's
// original value for per-subregion count sums.
struct WeightedPoint {
    int x = 0;
    int y = 0;
    long long weight = 0;
    double source_density = 0.0;
};

struct WeightedPointSet {
    int width = 0;
    int height = 0;
    std::vector<WeightedPoint> points;

    // Throws ValidationError: weights >= 1, coordinates inside the frame,
    // no duplicate coordinates.
    void validate() const;
};

struct KMeansParams {
    int max_iters = 100;
    double tol = 1e-4;  // stop when every center moves less than this
    std::uint64_t seed = 0;

    void validate() const;
};

// Weighted within-cluster sum of squares after each Lloyd iteration.
struct KMeansTrace {
    std::vector<double> wcss;
};

struct DbscanParams {
    double epsilon = 5.0;
    long long min_weight = 5;  // core threshold, counting multiplicities

    void validate() const;
};

// Per-point subregion labels in {1..n_subregions}. region_counts and order
// are filled once per-subregion center quotas have been assigned.
struct SubregionPartition {
    std::vector<int> labels;
    int n_subregions = 0;
    std::vector<long long> region_counts;  // K_i per subregion id (id-1 indexed)
    std::vector<int> order;                // ids ascending by density sum
};

struct Center {
    double x = 0.0;
    double y = 0.0;
    long long mass = 0;  // total point weight of the center's cluster
};

// Ranked head-center estimates; centers are sorted by descending mass
// (ties by lower x, then lower y) and their count is the K of the query.
struct LocalizationResult {
    std::vector<Center> centers;

    long long k() const { return static_cast<long long>(centers.size()); }
};

// Internals of one isolated-KMeans run, for diagnostics and tests.
struct IsolatedDiagnostics {
    long long k_total = 0;
    int n_subregions = 0;
    std::vector<long long> region_counts;  // centers contributed per subregion id
};

// One weighted point per pixel with round(value * f) >= 1.
WeightedPointSet build_point_set(const DensityMap& map,
                                 ExpansionFactor f = ExpansionFactor(500.0));

// K = round(integral), floored at zero.
long long global_cluster_count(const DensityMap& map);

// Weighted Lloyd iterations from a weighted k-means++ initialization.
// Deterministic in params.seed; throws InfeasibleK when K exceeds the
// number of distinct points.
LocalizationResult kmeans(const WeightedPointSet& pts, long long k,
                          const KMeansParams& params = {},
                          KMeansTrace* trace = nullptr);

// Classic density-based clustering on coordinates: a point is core when
// the total weight within epsilon (self included) reaches min_weight.
// Every point ends up labeled; noise is merged into the nearest labeled
// cluster.
SubregionPartition dbscan(const WeightedPointSet& pts, const DbscanParams& params = {});

// DBSCAN-partitioned KMeans with per-subregion center counts taken from
// the local density mass; always returns exactly global_cluster_count(map)
// centers (empty when that count is zero).
LocalizationResult isolated_kmeans(const DensityMap& map,
                                   ExpansionFactor f = ExpansionFactor(500.0),
                                   const DbscanParams& dbscan_params = {},
                                   const KMeansParams& kmeans_params = {},
                                   IsolatedDiagnostics* diag = nullptr);

}  // namespace dmap
