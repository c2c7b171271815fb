#pragma once

#include <vector>

#include "dmap/grid.hpp"
#include "dmap/gt_gen.hpp"

namespace dmap {

enum class Pooling { max, avg };

enum class SsimKernelKind { gaussian, uniform };

// Sliding-window configuration for the structural-similarity loss. The
// window weights are normalized to sum to 1.
struct SsimConfig {
    SsimKernelKind kernel = SsimKernelKind::gaussian;
    int size = 11;
    double sigma = 1.5;
    double dynamic_range = 1.0;
    double c1 = 1e-4;  // (0.01 * dynamic_range)^2
    double c2 = 9e-4;  // (0.03 * dynamic_range)^2

    static SsimConfig with_range(double range);

    void validate() const;
};

// T(e) = k_e * e + b_e, the per-epoch density threshold used to weight
// down dense regions early in training.
struct CurriculumSchedule {
    double k_e = 2e-3;
    double b_e = 5e-3;

    double threshold(int epoch) const { return k_e * epoch + b_e; }
};

struct LossWeights {
    double lambda_att = 0.5;
};

// Batch MSE: mean over pairs of the per-pair mean squared pixel difference.
double mse_loss(const std::vector<DensityMap>& preds, const std::vector<DensityMap>& gts);
double mse_loss(const DensityMap& pred, const DensityMap& gt);

// Spatial abstraction loss: MSE accumulated over `levels` resolutions,
// each obtained by one more 2x2 stride-2 pooling of both maps.
double sal_loss(const DensityMap& pred, const DensityMap& gt, int levels = 3,
                Pooling pooling = Pooling::avg);

// Multi-scale density level consistency loss over adaptive-average-pooled
// bins of the given grid sizes.
double msdlc_loss(const DensityMap& pred, const DensityMap& gt,
                  const std::vector<int>& sizes = {1, 2, 4});

// 1 - mean local SSIM index, sliding the window over every pixel with
// reflected borders.
double ssim_loss(const DensityMap& pred, const DensityMap& gt,
                 const SsimConfig& cfg = {});

// Mean binary cross-entropy between a predicted and a binary ground-truth
// attention map. Predictions are clamped to [1e-12, 1 - 1e-12].
double attention_loss(const AttentionMap& pred, const AttentionMap& gt);

// mse + msdlc (default sizes) + lambda_att * attention loss.
double total_loss(const DensityMap& pred, const DensityMap& gt,
                  const AttentionMap& pred_att, const AttentionMap& gt_att,
                  const LossWeights& weights = {});

// Per-pixel weights T(e)/max{M, T(e)}; 1 wherever the density is below the
// epoch threshold.
DensityMap curriculum_weights(const DensityMap& gt, int epoch,
                              const CurriculumSchedule& sched = {});

// MSE with the per-pixel difference scaled by the weight grid before squaring.
double weighted_mse_loss(const std::vector<DensityMap>& preds,
                         const std::vector<DensityMap>& gts,
                         const std::vector<DensityMap>& weights);
double weighted_mse_loss(const DensityMap& pred, const DensityMap& gt,
                         const DensityMap& weights);

}  // namespace dmap
