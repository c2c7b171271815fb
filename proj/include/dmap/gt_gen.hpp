#pragma once

#include <cstdint>
#include <vector>

#include "dmap/grid.hpp"

namespace dmap {

enum class SigmaMode { fixed, adaptive };

// Per-head Gaussian bandwidth rule. In adaptive mode a head's sigma is
// beta times the mean distance to its k nearest neighbors; heads with
// fewer than k neighbors fall back to fallback_sigma.
struct SigmaPolicy {
    SigmaMode mode = SigmaMode::adaptive;
    double fixed_sigma = 15.0;
    double beta = 0.3;
    int k_neighbors = 3;
    double fallback_sigma = 15.0;

    static SigmaPolicy fixed(double sigma);
    static SigmaPolicy adaptive(double beta = 0.3, int k = 3, double fallback = 15.0);

    void validate() const;
};

// Binary (ground truth) or [0,1]-valued (predicted) crowd-foreground mask.
class AttentionMap {
public:
    AttentionMap() = default;
    AttentionMap(int width, int height, std::vector<double> values);

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return values_.size(); }
    double at(int x, int y) const {
        return values_[static_cast<std::size_t>(y) * width_ + x];
    }
    const std::vector<double>& values() const { return values_; }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<double> values_;
};

// Sigma per head under an adaptive policy. Ties in neighbor distance are
// broken by lower point index.
std::vector<double> adaptive_sigmas(const AnnotationSet& ann, const SigmaPolicy& policy);

// Superposition of one truncated, renormalized Gaussian kernel per head;
// each head contributes exactly 1.0 to the integral.
DensityMap generate_density_map(const AnnotationSet& ann, const SigmaPolicy& policy);

// 1 inside the clipped (window x window) square around any head, else 0.
AttentionMap generate_attention_window(const AnnotationSet& ann, int window = 25);

// 1 where the value is strictly above the nearest-rank q-quantile, else 0.
AttentionMap generate_attention_threshold(const DensityMap& map, double quantile = 0.40);

enum class Placement { uniform, gaussian_mixture };

// Seeded synthetic crowd scene used by the benchmark harness.
struct SceneConfig {
    int width = 192;
    int height = 192;
    int min_heads = 50;
    int max_heads = 300;
    Placement placement = Placement::gaussian_mixture;
    int mixture_components = 4;
    double noise_sigma = 0.0;  // additive zero-mean Gaussian, clamped at 0
    std::uint64_t seed = 0;
    SigmaPolicy sigma_policy = SigmaPolicy::adaptive();

    void validate() const;
};

struct SynthScene {
    AnnotationSet annotations;
    DensityMap clean;
    DensityMap noisy;
};

SynthScene synth_scene(const SceneConfig& cfg);

}  // namespace dmap
