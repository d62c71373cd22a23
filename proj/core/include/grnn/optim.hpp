#pragma once

// RMSProp and Adam over the flat parameter enumeration. Both add epsilon
// after the square root, as Keras does.

#include <cstdint>
#include <span>
#include <vector>

#include "grnn/numkernel.hpp"

namespace grnn {

struct RmsPropConfig {
    Real learning_rate = 1e-3;
    Real rho = 0.9;
    Real epsilon = 1e-8;
};

struct AdamConfig {
    Real learning_rate = 1e-3;
    Real beta1 = 0.9;
    Real beta2 = 0.999;
    Real epsilon = 1e-8;
};

class RmsProp {
public:
    RmsProp(std::size_t slots, RmsPropConfig config = {});

    // E <- rho E + (1 - rho) g^2;  theta <- theta - lr g / (sqrt(E) + eps).
    // Throws NumericError, leaving params and state untouched, if any g is
    // not finite.
    void update(std::span<Real> params, std::span<const Real> grads);

    const RmsPropConfig& config() const noexcept { return config_; }
    std::span<const Real> accumulator() const noexcept { return mean_square_; }

private:
    RmsPropConfig config_;
    std::vector<Real> mean_square_;
};

class Adam {
public:
    Adam(std::size_t slots, AdamConfig config = {});

    void update(std::span<Real> params, std::span<const Real> grads);

    const AdamConfig& config() const noexcept { return config_; }
    std::uint64_t step() const noexcept { return step_; }
    std::span<const Real> first_moment() const noexcept { return m_; }
    std::span<const Real> second_moment() const noexcept { return v_; }

private:
    AdamConfig config_;
    std::uint64_t step_ = 0;
    std::vector<Real> m_;
    std::vector<Real> v_;
};

} // namespace grnn
