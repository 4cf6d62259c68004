#include "rave/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "rave/adam.hpp"
#include "rave/errors.hpp"
#include "rave/hierarchy.hpp"

namespace rave {

namespace {

/// Uniform double in [0,1) from the top 53 bits; independent of the standard
/// library's distribution implementations.
double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::vector<double> gradient_magnitude(const ImageBuffer& img) {
    const std::uint32_t w = img.width();
    const std::uint32_t h = img.height();
    auto lum = [&img](std::uint32_t x, std::uint32_t y) {
        return (img.at(x, y, 0) + img.at(x, y, 1) + img.at(x, y, 2)) / 3.0;
    };
    std::vector<double> out(img.pixel_count());
    for (std::uint32_t y = 0; y < h; ++y) {
        for (std::uint32_t x = 0; x < w; ++x) {
            const std::uint32_t xl = x > 0 ? x - 1 : x;
            const std::uint32_t xr = x + 1 < w ? x + 1 : x;
            const std::uint32_t yu = y > 0 ? y - 1 : y;
            const std::uint32_t yd = y + 1 < h ? y + 1 : y;
            const double gx = lum(xr, y) - lum(xl, y);
            const double gy = lum(x, yd) - lum(x, yu);
            out[static_cast<std::size_t>(y) * w + x] = std::sqrt(gx * gx + gy * gy);
        }
    }
    return out;
}

void check_finite(double loss, std::size_t iteration) {
    if (!std::isfinite(loss)) {
        throw TrainingDiverged(iteration, "loss became non-finite at iteration " +
                                              std::to_string(iteration));
    }
}

void check_parameters(const GaussianSet& set, std::span<const std::uint32_t> active,
                      std::size_t iteration) {
    for (std::size_t k = 0; k < kNumTrainablePlanes; ++k) {
        const auto plane = set.plane(static_cast<Plane>(k));
        for (std::uint32_t i : active) {
            if (!std::isfinite(plane[i])) {
                throw TrainingDiverged(iteration, "parameter became non-finite at iteration " +
                                                      std::to_string(iteration));
            }
        }
    }
}

void check_rates(const LearningRates& lr) {
    for (double v : lr.per_plane()) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw InvalidParameter("learning rates must be positive");
        }
    }
}

}  // namespace

std::array<double, kNumTrainablePlanes> LearningRates::per_plane() const {
    return {pos, pos, log_scale, log_scale, rotation, opacity_logit, color, color, color};
}

LearningRates LearningRates::scaled(double factor) const {
    return {pos * factor, log_scale * factor, rotation * factor, opacity_logit * factor,
            color * factor};
}

void TrainConfig::validate() const {
    if (num_gaussians == 0) {
        throw InvalidParameter("num_gaussians must be >= 1");
    }
    if (iterations == 0) {
        throw InvalidParameter("iterations must be >= 1");
    }
    check_rates(lr);
    loss.validate();
}

void FinetuneConfig::validate() const {
    if (iterations == 0) {
        throw InvalidParameter("fine-tune iterations must be >= 1");
    }
    check_rates(lr);
    loss.validate();
    for (const QuantPlane& p : quant.planes) {
        if (p.bits > 16) {
            throw InvalidSpec("quantizer bits must be in [0,16]");
        }
    }
}

GaussianSet init_from_image(const ImageBuffer& target, const TrainConfig& config) {
    if (target.pixel_count() == 0) {
        throw InvalidInput("target image has zero area");
    }
    if (config.num_gaussians == 0) {
        throw InvalidParameter("num_gaussians must be >= 1");
    }
    const std::uint32_t w = target.width();
    const std::uint32_t h = target.height();
    const std::vector<double> grad = gradient_magnitude(target);
    double grad_sum = 0.0;
    for (double g : grad) {
        grad_sum += g;
    }
    const double uniform = 1.0 / static_cast<double>(grad.size());
    std::vector<double> cdf(grad.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < grad.size(); ++i) {
        const double p = grad_sum > 0.0 ? 0.5 * grad[i] / grad_sum + 0.5 * uniform : uniform;
        acc += p;
        cdf[i] = acc;
    }

    std::mt19937_64 rng(config.seed);
    const double log_scale =
        std::log(std::sqrt(static_cast<double>(w) * h / static_cast<double>(config.num_gaussians)));
    GaussianSet set(w, h);
    for (std::uint32_t n = 0; n < config.num_gaussians; ++n) {
        const double u = uniform01(rng) * acc;
        auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        const auto pixel = static_cast<std::size_t>(
            std::min<std::ptrdiff_t>(it - cdf.begin(), static_cast<std::ptrdiff_t>(cdf.size()) - 1));
        const auto px = static_cast<std::uint32_t>(pixel % w);
        const auto py = static_cast<std::uint32_t>(pixel / w);
        Gaussian2D g;
        g.pos = {px + uniform01(rng), py + uniform01(rng)};
        g.log_scale = {log_scale, log_scale};
        g.rotation = 0.0;
        g.opacity_logit = 0.0;
        g.color = {target.at(px, py, 0), target.at(px, py, 1), target.at(px, py, 2)};
        g.depth_key = static_cast<double>(n);
        set.push_back(g);
    }
    return set;
}

TrainResult train(const ImageBuffer& target, const TrainConfig& config,
                  const ProgressFn& progress) {
    config.validate();
    return train_from(init_from_image(target, config), target, config, progress);
}

TrainResult train_from(GaussianSet init, const ImageBuffer& target, const TrainConfig& config,
                       const ProgressFn& progress) {
    config.validate();
    if (init.canvas_width() != target.width() || init.canvas_height() != target.height()) {
        throw InvalidInput("initial set canvas does not match the target image");
    }
    TrainResult result{std::move(init), {}};
    GaussianSet& set = result.set;
    GaussianAdam adam(set.size(), config.lr.per_plane(),
                      {config.adam_beta1, config.adam_beta2, config.adam_epsilon});
    const IndexSet all = full_index_set(set.size());
    result.loss_history.reserve(config.iterations);
    for (std::uint32_t it = 0; it < config.iterations; ++it) {
        const ImageBuffer image = render(set, all, config.render);
        const ValueAndGrad loss = combined_loss(image, target, config.loss);
        check_finite(loss.value, it);
        result.loss_history.push_back(loss.value);
        const GaussianGradients grads = render_backward(set, all, config.render, loss.grad);
        adam.step(set, grads, all);
        check_parameters(set, all, it);
        if (progress) {
            progress(it, loss.value);
        }
    }
    return result;
}

QuantSpec pin_ranges(const GaussianSet& set, const QuantSpec& bits) {
    const IndexSet all = full_index_set(set.size());
    QuantSpec spec = fit_ranges(set, all, bits);
    for (std::size_t k = 0; k < kNumPlanes; ++k) {
        QuantPlane& p = spec.planes[k];
        if (p.bits == 0) {
            continue;
        }
        const double margin = 0.05 * (static_cast<double>(p.max) - p.min);
        const double lo = p.min - margin;
        const double hi = p.max + margin;
        p.min = static_cast<float>(lo);
        p.max = static_cast<float>(hi);
        if (p.min > lo) {
            p.min = std::nextafter(p.min, -std::numeric_limits<float>::infinity());
        }
        if (p.max < hi) {
            p.max = std::nextafter(p.max, std::numeric_limits<float>::infinity());
        }
    }
    return spec;
}

FinetuneResult finetune_stochastic(const GaussianSet& set, const AnchorHierarchy& hierarchy,
                                   const ImageBuffer& target, const FinetuneConfig& config,
                                   const ProgressFn& progress) {
    config.validate();
    if (hierarchy.num_levels() == 0) {
        throw InvalidInput("empty hierarchy");
    }
    if (hierarchy.total_count() != set.size()) {
        throw InvalidInput("hierarchy was not built over this set");
    }
    FinetuneResult result;
    result.pinned_spec = pin_ranges(set, config.quant);
    GaussianSet current = set;
    const std::uint32_t levels = hierarchy.num_levels();

    auto anchor_psnr = [&](const GaussianSet& s, std::uint32_t l, const QuantSpec& spec) {
        const IndexSet& members = hierarchy.level(l);
        return psnr(render(quantized_copy(s, members, spec), members, config.render), target);
    };
    auto all_anchor_psnr = [&](const GaussianSet& s) {
        std::vector<double> out(levels);
        for (std::uint32_t l = 1; l <= levels; ++l) {
            out[l - 1] = anchor_psnr(s, l, result.pinned_spec);
        }
        return out;
    };
    auto finished = [&](const GaussianSet& s) {
        GaussianSet out = s;
        if (config.round_result_to_float) {
            for (std::size_t k = 0; k < kNumPlanes; ++k) {
                for (double& v : out.plane(static_cast<Plane>(k))) {
                    v = static_cast<float>(v);
                }
            }
        }
        return out;
    };
    const bool guarded = config.guard_interval > 0;
    if (guarded) {
        result.set = finished(set);
        result.final_psnr = all_anchor_psnr(result.set);
        result.reference_psnr.resize(levels);
        for (std::uint32_t l = 1; l <= levels; ++l) {
            const QuantSpec fitted = fit_ranges(set, hierarchy.level(l), config.quant);
            result.reference_psnr[l - 1] =
                std::max(result.final_psnr[l - 1], anchor_psnr(set, l, fitted));
        }
    }
    auto try_accept = [&](std::uint32_t done) {
        GaussianSet candidate = finished(current);
        std::vector<double> now = all_anchor_psnr(candidate);
        for (std::uint32_t l = 0; l < levels; ++l) {
            if (now[l] < result.reference_psnr[l]) {
                return;
            }
        }
        result.set = std::move(candidate);
        result.final_psnr = std::move(now);
        result.accepted_iterations = done;
    };

    GaussianAdam adam(current.size(), config.lr.per_plane(),
                      {config.adam_beta1, config.adam_beta2, config.adam_epsilon});
    std::mt19937_64 rng(config.seed);
    result.sampled_levels.reserve(config.iterations);
    result.loss_history.reserve(config.iterations);
    for (std::uint32_t it = 0; it < config.iterations; ++it) {
        const auto level = static_cast<std::uint32_t>(rng() % levels) + 1;
        const IndexSet& active = hierarchy.level(level);
        // Straight-through: forward on the quantization grid, gradients
        // applied to the full-precision parameters unchanged.
        const GaussianSet quantized = quantized_copy(current, active, result.pinned_spec);
        const ImageBuffer image = render(quantized, active, config.render);
        const ValueAndGrad loss = combined_loss(image, target, config.loss);
        check_finite(loss.value, it);
        const GaussianGradients grads = render_backward(quantized, active, config.render, loss.grad);
        adam.step(current, grads, active);
        check_parameters(current, active, it);
        result.sampled_levels.push_back(level);
        result.loss_history.push_back(loss.value);
        if (progress) {
            progress(it, loss.value);
        }
        const std::uint32_t done = it + 1;
        if (guarded && (done % config.guard_interval == 0 || done == config.iterations)) {
            try_accept(done);
        }
    }
    if (!guarded) {
        result.set = finished(current);
        result.accepted_iterations = config.iterations;
    }
    return result;
}

}  // namespace rave
