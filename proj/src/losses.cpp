#include "dmap/losses.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace dmap {

namespace {

void require_same_shape(int wa, int ha, int wb, int hb, std::int64_t pair_index) {
    if (wa != wb || ha != hb)
        throw ShapeError("maps must have identical dimensions", pair_index);
}

// Shared accumulation for the plain and weighted MSE so that unit weights
// reproduce the unweighted value bit for bit.
double mean_sq_diff(const DensityMap& pred, const DensityMap& gt,
                    const DensityMap* weights) {
    double sum = 0.0;
    const std::size_t n = pred.size();
    for (std::size_t i = 0; i < n; ++i) {
        double d = pred.values()[i] - gt.values()[i];
        if (weights) d *= weights->values()[i];
        sum += d * d;
    }
    return sum / static_cast<double>(n);
}

DensityMap pool2x2(const DensityMap& m, Pooling pooling) {
    const int w = m.width(), h = m.height();
    const int ow = (w + 1) / 2, oh = (h + 1) / 2;
    std::vector<double> out(static_cast<std::size_t>(ow) * oh);
    for (int oy = 0; oy < oh; ++oy) {
        const int y0 = 2 * oy, y1 = std::min(2 * oy + 1, h - 1);
        for (int ox = 0; ox < ow; ++ox) {
            const int x0 = 2 * ox, x1 = std::min(2 * ox + 1, w - 1);
            if (pooling == Pooling::max) {
                double v = m.at(x0, y0);
                for (int y = y0; y <= y1; ++y)
                    for (int x = x0; x <= x1; ++x) v = std::max(v, m.at(x, y));
                out[static_cast<std::size_t>(oy) * ow + ox] = v;
            } else {
                double v = 0.0;
                int count = 0;
                for (int y = y0; y <= y1; ++y)
                    for (int x = x0; x <= x1; ++x) {
                        v += m.at(x, y);
                        ++count;
                    }
                out[static_cast<std::size_t>(oy) * ow + ox] = v / count;
            }
        }
    }
    return DensityMap(ow, oh, std::move(out));
}

// Mean of `src` over the k x k adaptive-average-pooling bin (bi, bj).
// Bin rows cover [floor(i*H/k), floor((i+1)*H/k)), columns likewise.
double bin_average(const DensityMap& m, int k, int bi, int bj) {
    const auto lo = [](int i, int n, int k_) { return static_cast<int>((static_cast<long long>(i) * n) / k_); };
    const int y0 = lo(bi, m.height(), k), y1 = lo(bi + 1, m.height(), k);
    const int x0 = lo(bj, m.width(), k), x1 = lo(bj + 1, m.width(), k);
    double sum = 0.0;
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) sum += m.at(x, y);
    return sum / (static_cast<double>(y1 - y0) * (x1 - x0));
}

int reflect(int i, int n) {
    if (i < 0) return -i - 1;
    if (i >= n) return 2 * n - 1 - i;
    return i;
}

// Weighted local sums of src under the separable 1-D kernel, reflected
// borders. Valid while the kernel is no larger than either dimension.
void window_sums(const std::vector<double>& src, int w, int h,
                 const std::vector<double>& k1d, std::vector<double>& tmp,
                 std::vector<double>& dst) {
    const int r = static_cast<int>(k1d.size()) / 2;
    tmp.resize(src.size());
    dst.resize(src.size());
    for (int y = 0; y < h; ++y) {
        const double* row = src.data() + static_cast<std::size_t>(y) * w;
        double* out = tmp.data() + static_cast<std::size_t>(y) * w;
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int t = -r; t <= r; ++t) s += k1d[t + r] * row[reflect(x + t, w)];
            out[x] = s;
        }
    }
    for (int y = 0; y < h; ++y) {
        double* out = dst.data() + static_cast<std::size_t>(y) * w;
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int t = -r; t <= r; ++t)
                s += k1d[t + r] * tmp[static_cast<std::size_t>(reflect(y + t, h)) * w + x];
            out[x] = s;
        }
    }
}

}  // namespace

SsimConfig SsimConfig::with_range(double range) {
    SsimConfig cfg;
    cfg.dynamic_range = range;
    cfg.c1 = (0.01 * range) * (0.01 * range);
    cfg.c2 = (0.03 * range) * (0.03 * range);
    cfg.validate();
    return cfg;
}

void SsimConfig::validate() const {
    if (size < 1 || size % 2 == 0)
        throw InvalidParameter("SSIM kernel size must be an odd positive integer");
    if (kernel == SsimKernelKind::gaussian && !(sigma > 0.0))
        throw InvalidParameter("SSIM gaussian kernel needs sigma > 0");
    if (!(c1 > 0.0) || !(c2 > 0.0))
        throw InvalidParameter("SSIM stabilizers must be positive");
}

double mse_loss(const std::vector<DensityMap>& preds, const std::vector<DensityMap>& gts) {
    if (preds.empty() || preds.size() != gts.size())
        throw ShapeError("prediction and ground-truth batches must be non-empty "
                         "and of equal length");
    double sum = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        require_same_shape(preds[i].width(), preds[i].height(), gts[i].width(),
                           gts[i].height(), static_cast<std::int64_t>(i));
        sum += mean_sq_diff(preds[i], gts[i], nullptr);
    }
    return sum / static_cast<double>(preds.size());
}

double mse_loss(const DensityMap& pred, const DensityMap& gt) {
    require_same_shape(pred.width(), pred.height(), gt.width(), gt.height(), -1);
    return mean_sq_diff(pred, gt, nullptr);
}

double sal_loss(const DensityMap& pred, const DensityMap& gt, int levels,
                Pooling pooling) {
    if (levels < 1) throw InvalidParameter("abstraction depth must be >= 1");
    require_same_shape(pred.width(), pred.height(), gt.width(), gt.height(), -1);
    const int min_dim = std::min(pred.width(), pred.height());
    if (min_dim < (1 << (levels - 1)))
        throw InvalidParameter("map smaller than 2^(levels-1); abstraction depth " +
                               std::to_string(levels) + " is too deep");

    double sum = 0.0;
    DensityMap p = pred, g = gt;
    for (int level = 1; level <= levels; ++level) {
        if (level > 1) {
            p = pool2x2(p, pooling);
            g = pool2x2(g, pooling);
        }
        sum += mean_sq_diff(p, g, nullptr);
    }
    return sum;
}

double msdlc_loss(const DensityMap& pred, const DensityMap& gt,
                  const std::vector<int>& sizes) {
    require_same_shape(pred.width(), pred.height(), gt.width(), gt.height(), -1);
    double total = 0.0;
    for (int k : sizes) {
        if (k < 1 || k > std::min(pred.width(), pred.height()))
            throw InvalidParameter("pooling size " + std::to_string(k) +
                                   " exceeds map dimensions");
        double level = 0.0;
        for (int bi = 0; bi < k; ++bi)
            for (int bj = 0; bj < k; ++bj)
                level += std::abs(bin_average(pred, k, bi, bj) -
                                  bin_average(gt, k, bi, bj));
        total += level / (static_cast<double>(k) * k);
    }
    return total;
}

double ssim_loss(const DensityMap& pred, const DensityMap& gt, const SsimConfig& cfg) {
    cfg.validate();
    require_same_shape(pred.width(), pred.height(), gt.width(), gt.height(), -1);
    const int w = pred.width(), h = pred.height();
    if (std::min(w, h) < cfg.size)
        throw InvalidParameter("map smaller than the SSIM kernel");

    std::vector<double> k1d(static_cast<std::size_t>(cfg.size));
    if (cfg.kernel == SsimKernelKind::gaussian) {
        const int c = cfg.size / 2;
        double norm = 0.0;
        for (int i = 0; i < cfg.size; ++i) {
            const double d = i - c;
            norm += k1d[i] = std::exp(-d * d / (2.0 * cfg.sigma * cfg.sigma));
        }
        for (double& v : k1d) v /= norm;
    } else {
        std::fill(k1d.begin(), k1d.end(), 1.0 / cfg.size);
    }

    const std::size_t n = pred.size();
    std::vector<double> sq1(n), sq2(n), cross(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double a = pred.values()[i], b = gt.values()[i];
        sq1[i] = a * a;
        sq2[i] = b * b;
        cross[i] = a * b;
    }

    std::vector<double> tmp, mu1, mu2, s11, s22, s12;
    window_sums(pred.values(), w, h, k1d, tmp, mu1);
    window_sums(gt.values(), w, h, k1d, tmp, mu2);
    window_sums(sq1, w, h, k1d, tmp, s11);
    window_sums(sq2, w, h, k1d, tmp, s22);
    window_sums(cross, w, h, k1d, tmp, s12);

    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double m1 = mu1[i], m2 = mu2[i];
        const double var1 = s11[i] - m1 * m1;
        const double var2 = s22[i] - m2 * m2;
        const double cov = s12[i] - m1 * m2;
        mean += (2.0 * m1 * m2 + cfg.c1) * (2.0 * cov + cfg.c2) /
                ((m1 * m1 + m2 * m2 + cfg.c1) * (var1 + var2 + cfg.c2));
    }
    return 1.0 - mean / static_cast<double>(n);
}

double attention_loss(const AttentionMap& pred, const AttentionMap& gt) {
    require_same_shape(pred.width(), pred.height(), gt.width(), gt.height(), -1);
    constexpr double kClamp = 1e-12;
    double sum = 0.0;
    const std::size_t n = pred.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double g = gt.values()[i];
        if (g != 0.0 && g != 1.0)
            throw ValidationError("ground-truth attention value must be 0 or 1",
                                  static_cast<std::int64_t>(i));
        const double p = std::clamp(pred.values()[i], kClamp, 1.0 - kClamp);
        sum -= g * std::log(p) + (1.0 - g) * std::log(1.0 - p);
    }
    return sum / static_cast<double>(n);
}

double total_loss(const DensityMap& pred, const DensityMap& gt,
                  const AttentionMap& pred_att, const AttentionMap& gt_att,
                  const LossWeights& weights) {
    if (!std::isfinite(weights.lambda_att) || weights.lambda_att < 0.0)
        throw InvalidParameter("lambda_att must be finite and >= 0");
    return mse_loss(pred, gt) + msdlc_loss(pred, gt) +
           weights.lambda_att * attention_loss(pred_att, gt_att);
}

DensityMap curriculum_weights(const DensityMap& gt, int epoch,
                              const CurriculumSchedule& sched) {
    if (epoch < 0) throw InvalidParameter("epoch must be >= 0");
    const double t = sched.threshold(epoch);
    if (!(t > 0.0) || !std::isfinite(t))
        throw InvalidParameter("curriculum threshold T(e) must be positive");
    std::vector<double> out(gt.size());
    for (std::size_t i = 0; i < gt.size(); ++i)
        out[i] = t / std::max(gt.values()[i], t);
    return DensityMap(gt.width(), gt.height(), std::move(out));
}

double weighted_mse_loss(const std::vector<DensityMap>& preds,
                         const std::vector<DensityMap>& gts,
                         const std::vector<DensityMap>& weights) {
    if (preds.empty() || preds.size() != gts.size() || preds.size() != weights.size())
        throw ShapeError("prediction, ground-truth and weight batches must be "
                         "non-empty and of equal length");
    double sum = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const auto idx = static_cast<std::int64_t>(i);
        require_same_shape(preds[i].width(), preds[i].height(), gts[i].width(),
                           gts[i].height(), idx);
        require_same_shape(preds[i].width(), preds[i].height(), weights[i].width(),
                           weights[i].height(), idx);
        sum += mean_sq_diff(preds[i], gts[i], &weights[i]);
    }
    return sum / static_cast<double>(preds.size());
}

double weighted_mse_loss(const DensityMap& pred, const DensityMap& gt,
                         const DensityMap& weights) {
    require_same_shape(pred.width(), pred.height(), gt.width(), gt.height(), -1);
    require_same_shape(pred.width(), pred.height(), weights.width(), weights.height(), -1);
    return mean_sq_diff(pred, gt, &weights);
}

}  // namespace dmap
