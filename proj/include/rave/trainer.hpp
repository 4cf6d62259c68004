#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "rave/codec.hpp"
#include "rave/metrics.hpp"
#include "rave/splat.hpp"

namespace rave {

class AnchorHierarchy;

/// Learning rates for the trainable attribute groups.
struct LearningRates {
    double pos = 0.05;
    double log_scale = 0.01;
    double rotation = 0.01;
    double opacity_logit = 0.05;
    double color = 0.01;

    std::array<double, kNumTrainablePlanes> per_plane() const;
    LearningRates scaled(double factor) const;
};

struct TrainConfig {
    std::uint32_t num_gaussians = 512;
    std::uint32_t iterations = 2000;
    LearningRates lr;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    std::uint64_t seed = 0;
    LossConfig loss;
    RenderConfig render;

    void validate() const;
};

struct FinetuneConfig {
    std::uint32_t iterations = 50;
    /// Bit widths for the quantizer; ranges are pinned from the set on entry.
    QuantSpec quant = QuantSpec::defaults();
    std::uint64_t seed = 0;
    LearningRates lr = LearningRates{}.scaled(0.002);
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    LossConfig loss;
    RenderConfig render;
    /// Every `guard_interval` iterations, and after the last one, each anchor
    /// is rendered on the pinned grid; the state is kept only if no anchor
    /// scores below its starting PSNR. 0 disables the guard.
    std::uint32_t guard_interval = 10;
    /// Round every plane of the returned set to float32, and judge the guard
    /// on the rounded values, so a float checkpoint keeps the guarantee.
    bool round_result_to_float = false;

    void validate() const;
};

/// Seeded placement: positions drawn proportionally to the target's gradient
/// magnitude mixed half-and-half with a uniform floor; colour from the pixel
/// underneath; isotropic scale sqrt(W*H/N); opacity 0.5; depth = index.
GaussianSet init_from_image(const ImageBuffer& target, const TrainConfig& config);

struct TrainResult {
    GaussianSet set;
    /// Loss of the render before each Adam step.
    std::vector<double> loss_history;
};

/// Called after every iteration with (iteration, loss).
using ProgressFn = std::function<void(std::uint32_t, double)>;

/// Adam on all parameters against combined_loss. Throws TrainingDiverged on
/// a non-finite loss or parameter.
TrainResult train(const ImageBuffer& target, const TrainConfig& config,
                  const ProgressFn& progress = {});

/// Continues training from `init` instead of init_from_image.
TrainResult train_from(GaussianSet init, const ImageBuffer& target, const TrainConfig& config,
                       const ProgressFn& progress = {});

struct FinetuneResult {
    GaussianSet set;
    /// Ranges fixed on entry; encode with this spec to stay on the trained grid.
    QuantSpec pinned_spec;
    /// Sampled level (1-based) for each iteration.
    std::vector<std::uint32_t> sampled_levels;
    std::vector<double> loss_history;
    /// Starting PSNR of each anchor: the better of its own fitted grid and
    /// the pinned grid.
    std::vector<double> reference_psnr;
    /// Anchor PSNRs of the returned set on the pinned grid.
    std::vector<double> final_psnr;
    /// Iterations completed by the returned set (0 = the input itself).
    std::uint32_t accepted_iterations = 0;
};

/// Quantization-aware fine-tuning with stochastic anchor sampling: every
/// iteration draws a level uniformly, renders only that level through the
/// quantizer, and updates only its Gaussians (straight-through gradients).
/// With the guard on, no anchor ends below its starting PSNR.
FinetuneResult finetune_stochastic(const GaussianSet& set, const AnchorHierarchy& hierarchy,
                                   const ImageBuffer& target, const FinetuneConfig& config,
                                   const ProgressFn& progress = {});

/// Ranges fitted to every Gaussian of `set` with the bit widths of `bits`.
QuantSpec pin_ranges(const GaussianSet& set, const QuantSpec& bits);

}  // namespace rave
