#include "rave/adam.hpp"

#include <cmath>

#include "rave/errors.hpp"

namespace rave {

GaussianAdam::GaussianAdam(std::size_t count,
                           const std::array<double, kNumTrainablePlanes>& learning_rates,
                           AdamParams params)
    : lr_(learning_rates), params_(params), steps_(count, 0) {
    for (std::size_t k = 0; k < kNumTrainablePlanes; ++k) {
        if (!(lr_[k] > 0.0)) {
            throw InvalidParameter("learning rates must be positive");
        }
        m_[k].assign(count, 0.0);
        v_[k].assign(count, 0.0);
    }
}

void GaussianAdam::step(GaussianSet& set, const GaussianGradients& grads,
                        std::span<const std::uint32_t> active) {
    if (set.size() != steps_.size() || grads.size() != steps_.size()) {
        throw InvalidInput("optimizer state does not match the Gaussian count");
    }
    for (std::uint32_t i : active) {
        const std::uint64_t t = ++steps_[i];
        const double bc1 = 1.0 - std::pow(params_.beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(params_.beta2, static_cast<double>(t));
        for (std::size_t k = 0; k < kNumTrainablePlanes; ++k) {
            const double g = grads.planes[k][i];
            double& m = m_[k][i];
            double& v = v_[k][i];
            m = params_.beta1 * m + (1.0 - params_.beta1) * g;
            v = params_.beta2 * v + (1.0 - params_.beta2) * g * g;
            const double m_hat = m / bc1;
            const double v_hat = v / bc2;
            set.value(static_cast<Plane>(k), i) -=
                lr_[k] * m_hat / (std::sqrt(v_hat) + params_.epsilon);
        }
    }
}

}  // namespace rave
