#include <doctest.h>

#include <cmath>

#include "dmap/losses.hpp"
#include "dmap/rng.hpp"
#include "oracles.hpp"

using namespace dmap;

namespace {

DensityMap const_map(int w, int h, double v) {
    return DensityMap(w, h, std::vector<double>(static_cast<std::size_t>(w) * h, v));
}

DensityMap random_map(Rng& rng, int w, int h, double scale = 1.0) {
    std::vector<double> v(static_cast<std::size_t>(w) * h);
    for (double& x : v) x = rng.next_double() * scale;
    return DensityMap(w, h, std::move(v));
}

AttentionMap binary_map(Rng& rng, int w, int h) {
    std::vector<double> v(static_cast<std::size_t>(w) * h);
    for (double& x : v) x = rng.next_double() < 0.5 ? 0.0 : 1.0;
    return AttentionMap(w, h, std::move(v));
}

}  // namespace

TEST_CASE("mse_loss") {
    Rng rng(3);
    const DensityMap m = random_map(rng, 9, 7);
    CHECK(mse_loss(m, m) == 0.0);
    CHECK(mse_loss(const_map(4, 4, 0.5), const_map(4, 4, 0.0)) ==
          doctest::Approx(0.25).epsilon(1e-12));

    SUBCASE("batch is the mean of per-pair means") {
        const std::vector<DensityMap> preds = {const_map(3, 3, 0.5), const_map(5, 2, 0.3)};
        const std::vector<DensityMap> gts = {const_map(3, 3, 0.0), const_map(5, 2, 0.0)};
        CHECK(mse_loss(preds, gts) == doctest::Approx(0.17).epsilon(1e-12));
    }
    SUBCASE("shape mismatch names the pair") {
        const std::vector<DensityMap> preds = {const_map(3, 3, 0.1), const_map(4, 4, 0.1)};
        const std::vector<DensityMap> gts = {const_map(3, 3, 0.1), const_map(4, 5, 0.1)};
        try {
            mse_loss(preds, gts);
            FAIL("expected ShapeError");
        } catch (const ShapeError& e) {
            CHECK(e.index == 1);
        }
    }
    SUBCASE("symmetry") {
        const DensityMap a = random_map(rng, 6, 6), b = random_map(rng, 6, 6);
        CHECK(mse_loss(a, b) == mse_loss(b, a));
    }
}

TEST_CASE("sal_loss") {
    Rng rng(5);
    const DensityMap m = random_map(rng, 8, 8);
    CHECK(sal_loss(m, m, 3, Pooling::avg) == 0.0);
    CHECK(sal_loss(m, m, 3, Pooling::max) == 0.0);

    SUBCASE("depth 1 collapses to plain MSE") {
        const DensityMap a = random_map(rng, 8, 6), b = random_map(rng, 8, 6);
        CHECK(sal_loss(a, b, 1, Pooling::avg) == mse_loss(a, b));
    }
    SUBCASE("constant maps survive pooling at every level") {
        CHECK(sal_loss(const_map(4, 4, 1.0), const_map(4, 4, 0.0), 3, Pooling::avg) ==
              doctest::Approx(3.0).epsilon(1e-12));
        CHECK(sal_loss(const_map(4, 4, 1.0), const_map(4, 4, 0.0), 3, Pooling::max) ==
              doctest::Approx(3.0).epsilon(1e-12));
    }
    SUBCASE("odd trailing rows use a smaller final window") {
        // 3x3 pooled once -> 2x2 with edge windows of 1 or 2 cells
        const DensityMap a(3, 3, {1, 1, 1, 1, 1, 1, 1, 1, 1});
        const DensityMap b(3, 3, {0, 0, 0, 0, 0, 0, 0, 0, 0});
        CHECK(sal_loss(a, b, 2, Pooling::avg) == doctest::Approx(2.0).epsilon(1e-12));
    }
    SUBCASE("too deep for the map errors out") {
        CHECK_THROWS_AS(sal_loss(const_map(4, 4, 0.0), const_map(4, 4, 0.0), 4),
                        InvalidParameter);
        CHECK_NOTHROW(sal_loss(const_map(4, 4, 0.0), const_map(4, 4, 0.0), 3));
    }
}

TEST_CASE("msdlc_loss") {
    Rng rng(9);
    const DensityMap m = random_map(rng, 10, 10);
    CHECK(msdlc_loss(m, m) == 0.0);

    SUBCASE("single global bin is the absolute mean difference") {
        CHECK(msdlc_loss(const_map(5, 3, 0.8), const_map(5, 3, 0.25), {1}) ==
              doctest::Approx(0.55).epsilon(1e-12));
    }
    SUBCASE("worked 4x4 bin averages") {
        std::vector<double> v(16);
        for (int i = 0; i < 16; ++i) v[i] = i + 1;
        const DensityMap map(4, 4, std::move(v));
        // 2x2 bins average to 3.5, 5.5, 11.5, 13.5
        CHECK(msdlc_loss(map, const_map(4, 4, 0.0), {2}) ==
              doctest::Approx((3.5 + 5.5 + 11.5 + 13.5) / 4.0).epsilon(1e-12));
    }
    SUBCASE("size H on an HxH map collapses to L1/H^2") {
        const DensityMap a = random_map(rng, 6, 6), b = random_map(rng, 6, 6);
        double l1 = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i)
            l1 += std::abs(a.values()[i] - b.values()[i]);
        CHECK(msdlc_loss(a, b, {6}) == doctest::Approx(l1 / 36.0).epsilon(1e-12));
    }
    SUBCASE("oversized bins are rejected") {
        CHECK_THROWS_AS(msdlc_loss(const_map(3, 3, 0.0), const_map(3, 3, 0.0), {4}),
                        InvalidParameter);
    }
}

TEST_CASE("ssim_loss") {
    Rng rng(13);

    SUBCASE("a map against itself scores zero") {
        const DensityMap m = random_map(rng, 16, 16);
        CHECK(std::abs(ssim_loss(m, m)) <= 1e-9);
    }
    SUBCASE("constant maps follow the closed form") {
        const double loss = ssim_loss(const_map(16, 16, 1.0), const_map(16, 16, 0.0));
        const double expected = 1.0 - 1e-4 / (1.0 + 1e-4);
        CHECK(loss == doctest::Approx(expected).epsilon(1e-12));
        CHECK(loss == doctest::Approx(0.9999).epsilon(1e-4));
    }
    SUBCASE("matches the brute-force sliding-window oracle") {
        for (int trial = 0; trial < 5; ++trial) {
            const DensityMap a = random_map(rng, 16, 16), b = random_map(rng, 16, 16);
            CHECK(std::abs(ssim_loss(a, b) - oracles::brute_ssim_loss(a, b, {})) <= 1e-9);
        }
    }
    SUBCASE("uniform kernel agrees with its oracle too") {
        SsimConfig cfg;
        cfg.kernel = SsimKernelKind::uniform;
        cfg.size = 7;
        const DensityMap a = random_map(rng, 12, 12), b = random_map(rng, 12, 12);
        CHECK(std::abs(ssim_loss(a, b, cfg) - oracles::brute_ssim_loss(a, b, cfg)) <= 1e-9);
    }
    SUBCASE("symmetric within tolerance") {
        const DensityMap a = random_map(rng, 16, 16), b = random_map(rng, 16, 16);
        CHECK(std::abs(ssim_loss(a, b) - ssim_loss(b, a)) <= 1e-9);
    }
    SUBCASE("maps smaller than the kernel are rejected") {
        CHECK_THROWS_AS(ssim_loss(const_map(8, 8, 0.0), const_map(8, 8, 0.0)),
                        InvalidParameter);
    }
}

TEST_CASE("attention_loss") {
    Rng rng(21);
    const AttentionMap gt = binary_map(rng, 10, 10);
    CHECK(attention_loss(gt, gt) <= 1e-11);

    const AttentionMap half(4, 4, std::vector<double>(16, 0.5));
    const AttentionMap ones(4, 4, std::vector<double>(16, 1.0));
    const AttentionMap zeros(4, 4, std::vector<double>(16, 0.0));
    CHECK(attention_loss(half, ones) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(attention_loss(half, zeros) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    SUBCASE("non-binary ground truth is rejected") {
        CHECK_THROWS_AS(attention_loss(half, half), ValidationError);
    }
    SUBCASE("shape mismatch") {
        const AttentionMap small(3, 3, std::vector<double>(9, 1.0));
        CHECK_THROWS_AS(attention_loss(half, small), ShapeError);
    }
}

TEST_CASE("total_loss is the weighted component sum") {
    Rng rng(31);
    const DensityMap pred = random_map(rng, 8, 8), gt = random_map(rng, 8, 8);
    const AttentionMap gt_att = binary_map(rng, 8, 8);
    std::vector<double> pv(64);
    for (double& v : pv) v = rng.next_double();
    const AttentionMap pred_att(8, 8, std::move(pv));

    const double expected = mse_loss(pred, gt) + msdlc_loss(pred, gt) +
                            0.5 * attention_loss(pred_att, gt_att);
    CHECK(total_loss(pred, gt, pred_att, gt_att) ==
          doctest::Approx(expected).epsilon(1e-12));

    SUBCASE("lambda zero removes the attention term") {
        CHECK(total_loss(pred, gt, pred_att, gt_att, {0.0}) ==
              mse_loss(pred, gt) + msdlc_loss(pred, gt));
    }
    SUBCASE("identical inputs score zero") {
        CHECK(total_loss(gt, gt, gt_att, gt_att) <= 1e-9);
    }
}

TEST_CASE("curriculum_weights") {
    SUBCASE("saturates to one below the threshold") {
        const DensityMap gt = const_map(5, 5, 0.001);
        const DensityMap w = curriculum_weights(gt, 10);
        for (double v : w.values()) CHECK(v == 1.0);
    }
    SUBCASE("worked epoch-100 example") {
        const DensityMap gt = const_map(2, 2, 0.5);
        const DensityMap w = curriculum_weights(gt, 100);
        // T(100) = 0.002*100 + 0.005 = 0.205; 0.205/0.5 = 0.41
        for (double v : w.values()) CHECK(std::abs(v - 0.41) <= 1e-12);
    }
    SUBCASE("weights are in (0,1], nonincreasing in density, nondecreasing in epoch") {
        Rng rng(43);
        const DensityMap gt = random_map(rng, 12, 12, 2.0);
        DensityMap prev = curriculum_weights(gt, 0);
        for (int e = 1; e <= 20; ++e) {
            const DensityMap cur = curriculum_weights(gt, e * 10);
            for (std::size_t i = 0; i < cur.size(); ++i) {
                CHECK(cur.values()[i] > 0.0);
                CHECK(cur.values()[i] <= 1.0);
                CHECK(cur.values()[i] >= prev.values()[i]);
            }
            prev = cur;
        }
        const DensityMap w = curriculum_weights(gt, 50);
        for (int y = 0; y < 12; ++y)
            for (int x = 1; x < 12; ++x)
                if (gt.at(x, y) >= gt.at(x - 1, y))
                    CHECK(w.at(x, y) <= w.at(x - 1, y));
    }
    SUBCASE("non-positive thresholds are rejected") {
        CHECK_THROWS_AS(curriculum_weights(const_map(2, 2, 0.1), 1, {-1.0, 0.0}),
                        InvalidParameter);
        CHECK_THROWS_AS(curriculum_weights(const_map(2, 2, 0.1), -1, {}),
                        InvalidParameter);
    }
}

TEST_CASE("weighted_mse_loss") {
    Rng rng(53);
    const DensityMap pred = random_map(rng, 7, 9), gt = random_map(rng, 7, 9);

    SUBCASE("unit weights reproduce the plain MSE exactly") {
        const DensityMap ones = const_map(7, 9, 1.0);
        CHECK(weighted_mse_loss(pred, gt, ones) == mse_loss(pred, gt));
        CHECK(weighted_mse_loss({pred}, {gt}, {ones}) == mse_loss({pred}, {gt}));
    }
    SUBCASE("zero weights zero the loss") {
        CHECK(weighted_mse_loss(pred, gt, const_map(7, 9, 0.0)) == 0.0);
    }
    SUBCASE("constant half weights") {
        CHECK(weighted_mse_loss(const_map(4, 4, 1.0), const_map(4, 4, 0.0),
                                const_map(4, 4, 0.5)) ==
              doctest::Approx(0.25).epsilon(1e-12));
    }
    SUBCASE("weight shape mismatch") {
        CHECK_THROWS_AS(weighted_mse_loss(pred, gt, const_map(9, 7, 1.0)), ShapeError);
    }
}
