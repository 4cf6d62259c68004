#pragma once

#include <limits>

#include "rave/splat.hpp"

namespace rave {

struct LossConfig {
    double lambda = 0.2;  ///< weight of the D-SSIM term
    int ssim_window = 11;
    double ssim_sigma = 1.5;
    double ssim_c1 = 0.01 * 0.01;
    double ssim_c2 = 0.03 * 0.03;

    /// Throws InvalidParameter when lambda is outside [0,1] or the window is
    /// even or smaller than 3.
    void validate() const;
};

/// A scalar value together with its gradient w.r.t. the first image.
struct ValueAndGrad {
    double value = 0.0;
    ImageBuffer grad;
};

/// Mean absolute per-channel difference. Subgradient is 0 at exact ties.
ValueAndGrad l1_loss(const ImageBuffer& a, const ImageBuffer& b);

/// Mean SSIM over every fully contained Gaussian window, averaged over channels.
ValueAndGrad ssim(const ImageBuffer& a, const ImageBuffer& b, const LossConfig& config = {});

/// Value only; skips the gradient maps.
double ssim_value(const ImageBuffer& a, const ImageBuffer& b, const LossConfig& config = {});

/// (1 - lambda) * L1 + lambda * (1 - SSIM).
ValueAndGrad combined_loss(const ImageBuffer& render, const ImageBuffer& target,
                           const LossConfig& config = {});

inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

/// 10 log10(1 / MSE) with unit dynamic range; kPsnrIdentical when MSE is 0.
double psnr(const ImageBuffer& a, const ImageBuffer& b);

double mse(const ImageBuffer& a, const ImageBuffer& b);

}  // namespace rave
