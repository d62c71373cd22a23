#include "grnn/optim.hpp"

#include <cmath>
#include <string>

#include "grnn/errors.hpp"

namespace grnn {

namespace {

void check_update(std::size_t slots, std::span<Real> params, std::span<const Real> grads) {
    if (params.size() != slots || grads.size() != slots) {
        throw DimensionError("optimizer has " + std::to_string(slots) + " slots, got " +
                             std::to_string(params.size()) + " params and " +
                             std::to_string(grads.size()) + " gradients");
    }
    if (!all_finite(grads)) throw NumericError("non-finite gradient; update rejected");
}

} // namespace

RmsProp::RmsProp(std::size_t slots, RmsPropConfig config)
    : config_(config), mean_square_(slots, 0.0) {}

void RmsProp::update(std::span<Real> params, std::span<const Real> grads) {
    check_update(mean_square_.size(), params, grads);
    const Real rho = config_.rho;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Real g = grads[i];
        mean_square_[i] = rho * mean_square_[i] + (1.0 - rho) * g * g;
        if (g == 0.0) continue;
        params[i] -= config_.learning_rate * g / (std::sqrt(mean_square_[i]) + config_.epsilon);
    }
}

Adam::Adam(std::size_t slots, AdamConfig config)
    : config_(config), m_(slots, 0.0), v_(slots, 0.0) {}

void Adam::update(std::span<Real> params, std::span<const Real> grads) {
    check_update(m_.size(), params, grads);
    ++step_;
    const Real t = static_cast<Real>(step_);
    const Real correct1 = 1.0 - std::pow(config_.beta1, t);
    const Real correct2 = 1.0 - std::pow(config_.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Real g = grads[i];
        m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * g;
        v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * g * g;
        const Real m_hat = m_[i] / correct1;
        const Real v_hat = v_[i] / correct2;
        if (m_hat == 0.0) continue;
        params[i] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
}

} // namespace grnn
