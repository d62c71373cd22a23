#pragma once

// One recurrent layer read out from its final hidden state by a dense layer
// and a softmax, trained with categorical cross-entropy.

#include <cstddef>
#include <span>
#include <vector>

#include "grnn/bptt.hpp"
#include "grnn/cells.hpp"
#include "grnn/data.hpp"
#include "grnn/numkernel.hpp"

namespace grnn {

struct ClassifierParams {
    CellParams cell;
    Matrix readout;      // k x n
    Vector readout_bias; // k

    static ClassifierParams zeros(CellKind kind, std::size_t n, std::size_t m, std::size_t k);

    std::size_t classes() const noexcept { return readout.rows(); }
    std::size_t scalar_count() const noexcept {
        return cell.scalar_count() + readout.size() + readout_bias.size();
    }
    bool same_schema(const ClassifierParams& other) const noexcept {
        return cell.same_schema(other.cell) && classes() == other.classes();
    }

    friend bool operator==(const ClassifierParams&, const ClassifierParams&) = default;
};

// Cell per init_params, readout Glorot-uniform, readout bias zero.
ClassifierParams init_classifier(CellKind kind, std::size_t n, std::size_t m, std::size_t k,
                                 SeededRng& rng);

// Cell slots in enumerate_flat order, then the readout row-major, then its bias.
std::vector<Real> enumerate_flat(const ClassifierParams& params);
void assign_flat(ClassifierParams& params, std::span<const Real> flat);

struct PredictionResult {
    Vector logits;
    Vector probabilities;
    std::size_t predicted = 0; // argmax, lowest index on ties
};

PredictionResult predict(const ClassifierParams& params, const Matrix& xs);

struct LossAndGrad {
    Real loss = 0.0;
    ClassifierParams grads;
    PredictionResult prediction;
};

LossAndGrad loss_and_grad(const ClassifierParams& params, const Matrix& xs, std::size_t label);

// Adds this example's gradient into `accum` and returns its loss. Used by the
// training loop to avoid one gradient allocation per sequence.
Real accumulate_loss_and_grad(const ClassifierParams& params, const Matrix& xs,
                              std::size_t label, ClassifierParams& accum,
                              PredictionResult* prediction = nullptr);

// -ln softmax(logits)[label], evaluated through log-sum-exp.
Real cross_entropy(const Vector& logits, std::size_t label);

Real accuracy(const ClassifierParams& params, const SequenceDataset& dataset);

} // namespace grnn
