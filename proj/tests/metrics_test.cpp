#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "rave/errors.hpp"
#include "rave/metrics.hpp"
#include "test_support.hpp"

namespace rave {
namespace {

using testing::random_image;

/// Direct 2D Gaussian-weighted windows, one at a time, no separable passes.
double reference_ssim(const ImageBuffer& a, const ImageBuffer& b, const LossConfig& cfg) {
    const int n = cfg.ssim_window;
    const int r = n / 2;
    std::vector<double> k1(n);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        k1[i] = std::exp(-double((i - r) * (i - r)) / (2.0 * cfg.ssim_sigma * cfg.ssim_sigma));
        sum += k1[i];
    }
    for (double& v : k1) {
        v /= sum;
    }
    double total = 0.0;
    std::size_t windows = 0;
    for (int c = 0; c < 3; ++c) {
        for (std::uint32_t y0 = 0; y0 + n <= a.height(); ++y0) {
            for (std::uint32_t x0 = 0; x0 + n <= a.width(); ++x0) {
                double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
                for (int dy = 0; dy < n; ++dy) {
                    for (int dx = 0; dx < n; ++dx) {
                        const double w = k1[dy] * k1[dx];
                        const double va = a.at(x0 + dx, y0 + dy, c);
                        const double vb = b.at(x0 + dx, y0 + dy, c);
                        ma += w * va;
                        mb += w * vb;
                        saa += w * va * va;
                        sbb += w * vb * vb;
                        sab += w * va * vb;
                    }
                }
                const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
                total += ((2 * ma * mb + cfg.ssim_c1) * (2 * cov + cfg.ssim_c2)) /
                         ((ma * ma + mb * mb + cfg.ssim_c1) * (va + vb + cfg.ssim_c2));
                if (c == 0) {
                    ++windows;
                }
            }
        }
    }
    return total / (3.0 * windows);
}

void expect_gradient_matches(ImageBuffer a,
                             const std::function<ValueAndGrad(const ImageBuffer&)>& f) {
    const ValueAndGrad analytic = f(a);
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double numeric =
            testing::central_difference(a.data()[k], [&] { return f(a).value; }, 1e-6);
        ASSERT_LT(testing::relative_error(analytic.grad.data()[k], numeric, 1e-6), 1e-4)
            << "entry " << k << " analytic " << analytic.grad.data()[k] << " numeric " << numeric;
    }
}

TEST(l1_loss, uniform_offset) {
    ImageBuffer a(4, 3, {0.2, 0.2, 0.2});
    ImageBuffer b(4, 3, {0.5, 0.5, 0.5});
    const ValueAndGrad v = l1_loss(a, b);
    EXPECT_NEAR(v.value, 0.3, 1e-15);
    EXPECT_NEAR(v.grad.data()[0], -1.0 / 36.0, 1e-15);
}

TEST(l1_loss, identical_is_zero_with_zero_subgradient) {
    std::mt19937_64 rng(1);
    const ImageBuffer a = random_image(rng, 6, 6);
    const ValueAndGrad v = l1_loss(a, a);
    EXPECT_EQ(v.value, 0.0);
    for (double g : v.grad.data()) {
        EXPECT_EQ(g, 0.0);
    }
}

TEST(ssim, identical_images_score_one) {
    std::mt19937_64 rng(2);
    const ImageBuffer a = random_image(rng, 20, 17);
    EXPECT_NEAR(ssim(a, a).value, 1.0, 1e-12);
}

TEST(ssim, constant_images_follow_the_luminance_term) {
    const ImageBuffer a(12, 12, {0.2, 0.2, 0.2});
    const ImageBuffer b(12, 12, {0.6, 0.6, 0.6});
    const double c1 = 1e-4;
    EXPECT_NEAR(ssim_value(a, b), (2 * 0.2 * 0.6 + c1) / (0.04 + 0.36 + c1), 1e-12);
}

TEST(ssim, matches_direct_window_evaluation) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 4; ++trial) {
        const ImageBuffer a = random_image(rng, 19, 23);
        const ImageBuffer b = random_image(rng, 19, 23);
        EXPECT_NEAR(ssim_value(a, b), reference_ssim(a, b, {}), 1e-8);
        EXPECT_NEAR(ssim(a, b).value, ssim_value(a, b), 1e-14);
    }
    LossConfig small;
    small.ssim_window = 5;
    small.ssim_sigma = 0.8;
    const ImageBuffer a = random_image(rng, 9, 7);
    const ImageBuffer b = random_image(rng, 9, 7);
    EXPECT_NEAR(ssim_value(a, b, small), reference_ssim(a, b, small), 1e-8);
}

TEST(ssim, is_symmetric) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        const ImageBuffer a = random_image(rng, 16, 16);
        const ImageBuffer b = random_image(rng, 16, 16);
        EXPECT_NEAR(ssim_value(a, b), ssim_value(b, a), 1e-12);
    }
}

TEST(ssim, stays_within_bounds) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        const double s = ssim_value(random_image(rng, 14, 14), random_image(rng, 14, 14));
        EXPECT_LE(s, 1.0);
        EXPECT_GE(s, -1.0);
    }
}

TEST(ssim, image_smaller_than_window_throws) {
    EXPECT_THROW(ssim(ImageBuffer(10, 30), ImageBuffer(10, 30)), InvalidInput);
}

TEST(ssim, gradient_matches_finite_differences_small_window) {
    std::mt19937_64 rng(6);
    LossConfig cfg;
    cfg.ssim_window = 5;
    const ImageBuffer b = random_image(rng, 8, 8);
    expect_gradient_matches(random_image(rng, 8, 8),
                            [&](const ImageBuffer& a) { return ssim(a, b, cfg); });
}

TEST(ssim, gradient_matches_finite_differences_default_window) {
    std::mt19937_64 rng(7);
    const ImageBuffer b = random_image(rng, 16, 16);
    expect_gradient_matches(random_image(rng, 16, 16),
                            [&](const ImageBuffer& a) { return ssim(a, b); });
}

TEST(combined_loss, weights_both_terms) {
    std::mt19937_64 rng(8);
    const ImageBuffer a = random_image(rng, 16, 16);
    const ImageBuffer b = random_image(rng, 16, 16);
    const double expected = 0.8 * l1_loss(a, b).value + 0.2 * (1.0 - ssim_value(a, b));
    EXPECT_NEAR(combined_loss(a, b).value, expected, 1e-14);
}

TEST(combined_loss, zero_lambda_is_exactly_l1) {
    std::mt19937_64 rng(9);
    const ImageBuffer a = random_image(rng, 12, 12);
    const ImageBuffer b = random_image(rng, 12, 12);
    LossConfig cfg;
    cfg.lambda = 0.0;
    const ValueAndGrad c = combined_loss(a, b, cfg);
    const ValueAndGrad l = l1_loss(a, b);
    EXPECT_EQ(c.value, l.value);
    EXPECT_EQ(c.grad, l.grad);
}

TEST(combined_loss, gradient_matches_finite_differences) {
    std::mt19937_64 rng(10);
    const ImageBuffer b = random_image(rng, 12, 12);
    ImageBuffer a = b;
    for (double& v : a.data()) {
        v += (v < 0.5 ? 0.2 : -0.2);
    }
    expect_gradient_matches(a, [&](const ImageBuffer& x) { return combined_loss(x, b); });
}

TEST(loss_config, rejects_bad_values) {
    LossConfig cfg;
    cfg.lambda = 1.5;
    EXPECT_THROW(cfg.validate(), InvalidParameter);
    cfg = {};
    cfg.ssim_window = 4;
    EXPECT_THROW(cfg.validate(), InvalidParameter);
    cfg = {};
    cfg.ssim_window = 1;
    EXPECT_THROW(cfg.validate(), InvalidParameter);
    EXPECT_NO_THROW(LossConfig{}.validate());
}

TEST(psnr, identical_images_are_infinite) {
    std::mt19937_64 rng(11);
    const ImageBuffer a = random_image(rng, 5, 5);
    EXPECT_EQ(psnr(a, a), kPsnrIdentical);
}

TEST(psnr, known_mse_values) {
    const ImageBuffer a(8, 8, {0.5, 0.5, 0.5});
    EXPECT_NEAR(psnr(a, ImageBuffer(8, 8, {0.6, 0.6, 0.6})), 20.0, 1e-9);
    EXPECT_NEAR(psnr(a, ImageBuffer(8, 8, {0.49, 0.49, 0.49})), 40.0, 1e-9);
    EXPECT_NEAR(mse(a, ImageBuffer(8, 8, {0.6, 0.6, 0.6})), 0.01, 1e-15);
}

TEST(metrics, shape_mismatch_throws) {
    const ImageBuffer a(8, 8), b(8, 9);
    EXPECT_THROW(l1_loss(a, b), InvalidInput);
    EXPECT_THROW(psnr(a, b), InvalidInput);
    EXPECT_THROW(combined_loss(a, b), InvalidInput);
}

}  // namespace
}  // namespace rave
