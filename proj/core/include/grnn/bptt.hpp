#pragma once

// Full-sequence forward pass with a tape, exact backpropagation through time,
// and a central-difference gradient checker.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "grnn/cells.hpp"
#include "grnn/numkernel.hpp"

namespace grnn {

struct SequenceTape {
    CellKind kind = CellKind::SRNN;
    std::size_t n = 0;
    std::size_t m = 0;
    std::vector<StepCache> steps;
    RecurrentState final_state;

    std::size_t length() const noexcept { return steps.size(); }
};

// Gradients share the CellParams schema, so parameters a variant does not
// have (W_f for MGU1, ...) have no slot at all.
struct Gradients {
    CellParams params;
    Vector initial_h; // dL/dh0
};

struct ForwardResult {
    RecurrentState final_state;
    SequenceTape tape;
};

// xs holds one timestep per row (T x m). Starts from h0 = 0 (and c0 = 0).
ForwardResult forward_sequence(const CellParams& params, const Matrix& xs);

// Forward pass that keeps only the final state; used for inference.
RecurrentState run_sequence(const CellParams& params, const Matrix& xs);

Gradients backward_sequence(const CellParams& params, const SequenceTape& tape,
                            std::span<const Real> dl_dh_final);

// Same as backward_sequence but adds into an existing accumulator and returns
// dL/dh0. `accum` must have the schema of `params`.
Vector accumulate_backward(const CellParams& params, const SequenceTape& tape,
                           std::span<const Real> dl_dh_final, CellParams& accum);

struct StepGradient {
    Vector h_prev;
    std::optional<Vector> c_prev;
};

// Differentiates one timestep. `dc` is the incoming memory-cell gradient and is
// only read for the LSTM.
StepGradient step_backward(const CellParams& params, const StepCache& cache,
                           std::span<const Real> dh, const std::optional<Vector>& dc,
                           CellParams& accum);

// A scalar function of the final hidden state together with its gradient.
struct FinalStateLoss {
    std::function<Real(const Vector&)> value;
    std::function<Vector(const Vector&)> gradient;
};

// L = w . h
FinalStateLoss linear_probe_loss(Vector weights);
// L = 0.5 |h - target|^2
FinalStateLoss quadratic_loss(Vector target);

using BackwardFn =
    std::function<Gradients(const CellParams&, const SequenceTape&, std::span<const Real>)>;

struct GradCheckResult {
    Real max_relative_error = 0.0;
    std::size_t worst_slot = 0; // index into enumerate_flat order
    Real analytic = 0.0;
    Real numeric = 0.0;
    std::size_t slots = 0;
};

// |a - b| / max(1e-8, |a| + |b|)
Real relative_error(Real analytic, Real numeric) noexcept;

// Central differences over every parameter scalar, compared against
// `backward` (backward_sequence when empty).
GradCheckResult gradient_check(const CellParams& params, const Matrix& xs,
                               const FinalStateLoss& loss, Real epsilon = 1e-5,
                               const BackwardFn& backward = {});

} // namespace grnn
