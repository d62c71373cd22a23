#include "grnn/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "grnn/errors.hpp"

namespace grnn {

namespace {

Vector logits_from_state(const ClassifierParams& params, const Vector& h) {
    Vector logits = params.readout_bias;
    matvec_add(params.readout, h.span(), logits.span());
    return logits;
}

PredictionResult make_prediction(Vector logits) {
    PredictionResult out;
    out.probabilities = softmax(logits);
    out.predicted = argmax(out.probabilities.span());
    out.logits = std::move(logits);
    return out;
}

} // namespace

ClassifierParams ClassifierParams::zeros(CellKind kind, std::size_t n, std::size_t m,
                                         std::size_t k) {
    if (k == 0) throw DimensionError("classifier needs at least one class");
    return {CellParams::zeros(kind, n, m), Matrix(k, n), Vector(k)};
}

ClassifierParams init_classifier(CellKind kind, std::size_t n, std::size_t m, std::size_t k,
                                 SeededRng& rng) {
    ClassifierParams p = ClassifierParams::zeros(kind, n, m, k);
    p.cell = init_params(kind, n, m, rng);
    p.readout = glorot_uniform(rng, k, n);
    return p;
}

std::vector<Real> enumerate_flat(const ClassifierParams& params) {
    std::vector<Real> flat(params.scalar_count());
    const std::size_t cell = params.cell.scalar_count();
    write_flat(params.cell, std::span<Real>(flat).first(cell));
    auto it = flat.begin() + static_cast<std::ptrdiff_t>(cell);
    it = std::copy(params.readout.span().begin(), params.readout.span().end(), it);
    std::copy(params.readout_bias.begin(), params.readout_bias.end(), it);
    return flat;
}

void assign_flat(ClassifierParams& params, std::span<const Real> flat) {
    if (flat.size() != params.scalar_count()) {
        throw DimensionError("flat classifier buffer has " + std::to_string(flat.size()) +
                             " slots, expected " + std::to_string(params.scalar_count()));
    }
    const std::size_t cell = params.cell.scalar_count();
    assign_flat(params.cell, flat.first(cell));
    auto rest = flat.subspan(cell);
    std::copy_n(rest.begin(), params.readout.size(), params.readout.span().begin());
    rest = rest.subspan(params.readout.size());
    std::copy_n(rest.begin(), params.readout_bias.size(), params.readout_bias.begin());
}

PredictionResult predict(const ClassifierParams& params, const Matrix& xs) {
    const RecurrentState final_state = run_sequence(params.cell, xs);
    return make_prediction(logits_from_state(params, final_state.h));
}

Real cross_entropy(const Vector& logits, std::size_t label) {
    if (label >= logits.size()) {
        throw InputError("label " + std::to_string(label) + " outside " +
                         std::to_string(logits.size()) + " classes");
    }
    const Real peak = *std::max_element(logits.begin(), logits.end());
    Real total = 0.0;
    for (Real z : logits) total += std::exp(z - peak);
    return std::log(total) + peak - logits[label];
}

Real accumulate_loss_and_grad(const ClassifierParams& params, const Matrix& xs,
                              std::size_t label, ClassifierParams& accum,
                              PredictionResult* prediction) {
    const std::size_t k = params.classes();
    if (label >= k) {
        throw InputError("label " + std::to_string(label) + " out of range for " +
                         std::to_string(k) + " classes");
    }
    if (!accum.same_schema(params)) throw StateError("gradient accumulator schema mismatch");

    ForwardResult fwd = forward_sequence(params.cell, xs);
    const Vector& h = fwd.final_state.h;
    PredictionResult pred = make_prediction(logits_from_state(params, h));
    const Real loss = cross_entropy(pred.logits, label);

    Vector d_logits = pred.probabilities;
    d_logits[label] -= 1.0;
    outer_add(accum.readout, d_logits.span(), h.span());
    axpy(1.0, d_logits.span(), accum.readout_bias.span());
    Vector dh(params.cell.n);
    matvec_transposed_add(params.readout, d_logits.span(), dh.span());
    accumulate_backward(params.cell, fwd.tape, dh.span(), accum.cell);

    if (prediction != nullptr) *prediction = std::move(pred);
    return loss;
}

LossAndGrad loss_and_grad(const ClassifierParams& params, const Matrix& xs, std::size_t label) {
    LossAndGrad out;
    out.grads = ClassifierParams::zeros(params.cell.kind, params.cell.n, params.cell.m,
                                        params.classes());
    out.loss = accumulate_loss_and_grad(params, xs, label, out.grads, &out.prediction);
    return out;
}

Real accuracy(const ClassifierParams& params, const SequenceDataset& dataset) {
    if (dataset.empty()) throw InputError("accuracy of an empty dataset");
    std::size_t correct = 0;
    for (const auto& ex : dataset.examples) {
        if (predict(params, ex.xs).predicted == ex.label) ++correct;
    }
    return static_cast<Real>(correct) / static_cast<Real>(dataset.size());
}

} // namespace grnn
