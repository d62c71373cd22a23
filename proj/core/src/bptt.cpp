#include "grnn/bptt.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "grnn/errors.hpp"

namespace grnn {

namespace {

void check_sequence(const CellParams& params, const Matrix& xs) {
    if (xs.rows() == 0) throw InputError("sequence must contain at least one timestep");
    if (xs.cols() != params.m) {
        throw DimensionError("sequence input width " + std::to_string(xs.cols()) +
                             " does not match cell input size " + std::to_string(params.m));
    }
}

// Backward through a = U h_in + W x + b given da; accumulates parameter
// gradients into `grad` and U^T da into `dh_in`.
void block_backward(const AffineBlock& block, AffineBlock& grad, std::span<const Real> da,
                    std::span<const Real> h_in, std::span<const Real> x, std::span<Real> dh_in) {
    if (block.u) {
        outer_add(*grad.u, da, h_in);
        matvec_transposed_add(*block.u, da, dh_in);
    }
    if (block.w) outer_add(*grad.w, da, x);
    if (block.b) axpy(1.0, da, grad.b->span());
}

// Sigmoid derivative expressed through its output.
Vector gate_preactivation_grad(const Vector& d_gate, const Vector& gate) {
    Vector da(gate.size());
    for (std::size_t j = 0; j < gate.size(); ++j) da[j] = d_gate[j] * gate[j] * (1.0 - gate[j]);
    return da;
}

// Shared GRU/MGU update h' = (1-z) h + z tanh(U (r*h) + W x + b). For the MGU
// family z and r are the same gate; their contributions are summed.
void interpolating_backward(const CellParams& params, const StepCache& cache,
                            std::span<const Real> dh, const Vector& z, const Vector& r,
                            Vector& dz, Vector& dr, Vector& dh_prev, CellParams& accum) {
    const std::size_t n = params.n;
    const Vector& h = cache.h_prev;
    const Vector& cand = cache.candidate;
    Vector da_c(n);
    Vector rh(n);
    for (std::size_t j = 0; j < n; ++j) {
        dz[j] += dh[j] * (cand[j] - h[j]);
        dh_prev[j] += dh[j] * (1.0 - z[j]);
        da_c[j] = dh[j] * z[j] * (1.0 - cand[j] * cand[j]);
        rh[j] = r[j] * h[j];
    }
    Vector d_rh(n);
    block_backward(params.candidate, accum.candidate, da_c.span(), rh.span(), cache.x.span(),
                   d_rh.span());
    for (std::size_t j = 0; j < n; ++j) {
        dh_prev[j] += d_rh[j] * r[j];
        dr[j] += d_rh[j] * h[j];
    }
}

} // namespace

ForwardResult forward_sequence(const CellParams& params, const Matrix& xs) {
    check_sequence(params, xs);
    ForwardResult out;
    out.tape.kind = params.kind;
    out.tape.n = params.n;
    out.tape.m = params.m;
    out.tape.steps.reserve(xs.rows());
    RecurrentState state = RecurrentState::initial(params.kind, params.n);
    for (std::size_t t = 0; t < xs.rows(); ++t) {
        StepResult step = step_forward(params, state, xs.row(t));
        out.tape.steps.push_back(std::move(step.cache));
        state = std::move(step.state);
    }
    out.tape.final_state = state;
    out.final_state = std::move(state);
    return out;
}

RecurrentState run_sequence(const CellParams& params, const Matrix& xs) {
    check_sequence(params, xs);
    RecurrentState state = RecurrentState::initial(params.kind, params.n);
    for (std::size_t t = 0; t < xs.rows(); ++t) {
        state = step_forward(params, state, xs.row(t)).state;
    }
    return state;
}

StepGradient step_backward(const CellParams& params, const StepCache& cache,
                           std::span<const Real> dh, const std::optional<Vector>& dc,
                           CellParams& accum) {
    const std::size_t n = params.n;
    StepGradient out{Vector(n), std::nullopt};
    const Vector& x = cache.x;
    const Vector& h = cache.h_prev;

    switch (params.kind) {
    case CellKind::SRNN: {
        Vector da(n);
        for (std::size_t j = 0; j < n; ++j) {
            da[j] = dh[j] * (1.0 - cache.candidate[j] * cache.candidate[j]);
        }
        block_backward(params.candidate, accum.candidate, da.span(), h.span(), x.span(),
                       out.h_prev.span());
        break;
    }
    case CellKind::LSTM: {
        const Vector& i = cache.gates[gate::kLstmInput];
        const Vector& f = cache.gates[gate::kLstmForget];
        const Vector& o = cache.gates[gate::kLstmOutput];
        const Vector& tc = *cache.tanh_c;
        const Vector& c_prev = *cache.c_prev;
        const Vector& cand = cache.candidate;
        Vector di(n), df(n), d_o(n), da_c(n), dc_prev(n);
        for (std::size_t j = 0; j < n; ++j) {
            const Real dc_in = dc ? (*dc)[j] : 0.0;
            const Real dc_total = dc_in + dh[j] * o[j] * (1.0 - tc[j] * tc[j]);
            d_o[j] = dh[j] * tc[j];
            di[j] = dc_total * cand[j];
            df[j] = dc_total * c_prev[j];
            da_c[j] = dc_total * i[j] * (1.0 - cand[j] * cand[j]);
            dc_prev[j] = dc_total * f[j];
        }
        block_backward(params.candidate, accum.candidate, da_c.span(), h.span(), x.span(),
                       out.h_prev.span());
        const Vector* d_gates[3] = {&di, &df, &d_o};
        for (std::size_t g = 0; g < 3; ++g) {
            const Vector da = gate_preactivation_grad(*d_gates[g], cache.gates[g]);
            block_backward(params.gates[g], accum.gates[g], da.span(), h.span(), x.span(),
                           out.h_prev.span());
        }
        out.c_prev = std::move(dc_prev);
        break;
    }
    case CellKind::GRU: {
        const Vector& z = cache.gates[gate::kGruUpdate];
        const Vector& r = cache.gates[gate::kGruReset];
        Vector dz(n), dr(n);
        interpolating_backward(params, cache, dh, z, r, dz, dr, out.h_prev, accum);
        const Vector da_z = gate_preactivation_grad(dz, z);
        const Vector da_r = gate_preactivation_grad(dr, r);
        block_backward(params.gates[gate::kGruUpdate], accum.gates[gate::kGruUpdate],
                       da_z.span(), h.span(), x.span(), out.h_prev.span());
        block_backward(params.gates[gate::kGruReset], accum.gates[gate::kGruReset],
                       da_r.span(), h.span(), x.span(), out.h_prev.span());
        break;
    }
    case CellKind::MGU:
    case CellKind::MGU1:
    case CellKind::MGU2:
    case CellKind::MGU3: {
        const Vector& f = cache.gates[gate::kForget];
        Vector df(n);
        interpolating_backward(params, cache, dh, f, f, df, df, out.h_prev, accum);
        const Vector da_f = gate_preactivation_grad(df, f);
        block_backward(params.gates[gate::kForget], accum.gates[gate::kForget], da_f.span(),
                       h.span(), x.span(), out.h_prev.span());
        break;
    }
    }
    return out;
}

Vector accumulate_backward(const CellParams& params, const SequenceTape& tape,
                           std::span<const Real> dl_dh_final, CellParams& accum) {
    if (tape.kind != params.kind || tape.n != params.n || tape.m != params.m) {
        throw StateError("tape was recorded for a different cell configuration");
    }
    if (!accum.same_schema(params)) throw StateError("gradient accumulator schema mismatch");
    if (dl_dh_final.size() != params.n) {
        throw DimensionError("upstream gradient length " + std::to_string(dl_dh_final.size()) +
                             " does not match hidden size " + std::to_string(params.n));
    }
    if (tape.steps.empty()) throw StateError("empty tape");

    Vector dh(std::vector<Real>(dl_dh_final.begin(), dl_dh_final.end()));
    std::optional<Vector> dc;
    if (has_memory_cell(params.kind)) dc = Vector(params.n);
    for (std::size_t t = tape.steps.size(); t-- > 0;) {
        StepGradient g = step_backward(params, tape.steps[t], dh.span(), dc, accum);
        dh = std::move(g.h_prev);
        dc = std::move(g.c_prev);
    }
    return dh;
}

Gradients backward_sequence(const CellParams& params, const SequenceTape& tape,
                            std::span<const Real> dl_dh_final) {
    Gradients out{CellParams::zeros(params.kind, params.n, params.m), Vector()};
    out.initial_h = accumulate_backward(params, tape, dl_dh_final, out.params);
    return out;
}

FinalStateLoss linear_probe_loss(Vector weights) {
    return {
        [weights](const Vector& h) { return dot(weights.span(), h.span()); },
        [weights](const Vector&) { return weights; },
    };
}

FinalStateLoss quadratic_loss(Vector target) {
    return {
        [target](const Vector& h) {
            Real total = 0.0;
            for (std::size_t j = 0; j < h.size(); ++j) {
                const Real d = h[j] - target[j];
                total += 0.5 * d * d;
            }
            return total;
        },
        [target](const Vector& h) {
            Vector g(h.size());
            for (std::size_t j = 0; j < h.size(); ++j) g[j] = h[j] - target[j];
            return g;
        },
    };
}

Real relative_error(Real analytic, Real numeric) noexcept {
    return std::abs(analytic - numeric) /
           std::max<Real>(1e-8, std::abs(analytic) + std::abs(numeric));
}

GradCheckResult gradient_check(const CellParams& params, const Matrix& xs,
                               const FinalStateLoss& loss, Real epsilon,
                               const BackwardFn& backward) {
    ForwardResult fwd = forward_sequence(params, xs);
    const Vector upstream = loss.gradient(fwd.final_state.h);
    const Gradients grads = backward ? backward(params, fwd.tape, upstream.span())
                                     : backward_sequence(params, fwd.tape, upstream.span());
    const std::vector<Real> analytic = enumerate_flat(grads.params);

    std::vector<Real> flat = enumerate_flat(params);
    CellParams probe = params;
    auto evaluate = [&]() {
        assign_flat(probe, flat);
        const Real value = loss.value(run_sequence(probe, xs).h);
        if (!std::isfinite(value)) throw NumericError("gradient check hit a non-finite loss");
        return value;
    };

    GradCheckResult result;
    result.slots = flat.size();
    for (std::size_t k = 0; k < flat.size(); ++k) {
        const Real saved = flat[k];
        flat[k] = saved + epsilon;
        const Real plus = evaluate();
        flat[k] = saved - epsilon;
        const Real minus = evaluate();
        flat[k] = saved;
        const Real numeric = (plus - minus) / (2.0 * epsilon);
        const Real err = relative_error(analytic[k], numeric);
        if (k == 0 || err > result.max_relative_error) {
            result.max_relative_error = err;
            result.worst_slot = k;
            result.analytic = analytic[k];
            result.numeric = numeric;
        }
    }
    return result;
}

} // namespace grnn
