#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "rave/splat.hpp"

namespace rave {

struct AdamParams {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Adam over the trainable planes of a GaussianSet. Moments and the step
/// counter are kept per Gaussian, so a Gaussian left out of an update keeps
/// its state untouched.
class GaussianAdam {
public:
    GaussianAdam(std::size_t count, const std::array<double, kNumTrainablePlanes>& learning_rates,
                 AdamParams params = {});

    /// Applies one step to the Gaussians in `active` only.
    void step(GaussianSet& set, const GaussianGradients& grads,
              std::span<const std::uint32_t> active);

    std::uint64_t steps_taken(std::size_t i) const { return steps_[i]; }
    double first_moment(Plane p, std::size_t i) const {
        return m_[static_cast<std::size_t>(p)][i];
    }
    double second_moment(Plane p, std::size_t i) const {
        return v_[static_cast<std::size_t>(p)][i];
    }

private:
    std::array<double, kNumTrainablePlanes> lr_;
    AdamParams params_;
    std::array<std::vector<double>, kNumTrainablePlanes> m_;
    std::array<std::vector<double>, kNumTrainablePlanes> v_;
    std::vector<std::uint64_t> steps_;
};

}  // namespace rave
