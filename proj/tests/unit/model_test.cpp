#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>

#include "grnn/errors.hpp"
#include "grnn/model.hpp"
#include "random_params.hpp"

namespace grnn {
namespace {

using testing::random_classifier;
using testing::random_sequence;

SequenceDataset dataset_of(std::vector<LabeledSequence> examples, std::size_t k) {
    SequenceDataset d;
    d.length = examples.front().xs.rows();
    d.input_size = examples.front().xs.cols();
    d.classes = k;
    d.examples = std::move(examples);
    return d;
}

TEST(Predict, AllZeroParamsIsUniform) {
    const ClassifierParams p = ClassifierParams::zeros(CellKind::MGU, 4, 3, 10);
    SeededRng rng(1);
    const PredictionResult r = predict(p, random_sequence(5, 3, rng));
    for (Real q : r.probabilities) EXPECT_DOUBLE_EQ(q, 0.1);
    EXPECT_EQ(r.predicted, 0u);
}

TEST(Predict, BiasDominatedTwoClass) {
    ClassifierParams p = ClassifierParams::zeros(CellKind::SRNN, 2, 1, 2);
    p.readout_bias[0] = 5.0;
    const PredictionResult r = predict(p, Matrix(3, 1, {1, 2, 3}));
    EXPECT_NEAR(r.probabilities[0], 0.9933071490757153, 1e-15);
    EXPECT_NEAR(r.probabilities[1], 0.006692850924284856, 1e-15);
    EXPECT_EQ(r.predicted, 0u);
}

TEST(Predict, SingleUnitLogitIsFinalState) {
    SeededRng rng(2);
    ClassifierParams p = random_classifier(CellKind::GRU, 1, 2, 1, rng);
    p.readout(0, 0) = 1.0;
    p.readout_bias[0] = 0.0;
    const Matrix xs = random_sequence(4, 2, rng);
    EXPECT_EQ(predict(p, xs).logits[0], run_sequence(p.cell, xs).h[0]);
}

TEST(Predict, ProbabilitiesAreADistribution) {
    SeededRng rng(3);
    for (CellKind kind : kAllCellKinds) {
        const ClassifierParams p = random_classifier(kind, 5, 3, 7, rng, 2.0);
        const PredictionResult r = predict(p, random_sequence(6, 3, rng));
        EXPECT_NEAR(std::accumulate(r.probabilities.begin(), r.probabilities.end(), 0.0), 1.0,
                    1e-12);
        EXPECT_EQ(r.predicted, argmax(r.logits.span()));
    }
}

TEST(Predict, LogitShiftInvariance) {
    SeededRng rng(4);
    ClassifierParams p = random_classifier(CellKind::MGU1, 4, 2, 5, rng);
    const Matrix xs = random_sequence(3, 2, rng);
    const PredictionResult before = predict(p, xs);
    for (Real& b : p.readout_bias) b += 7.5;
    const PredictionResult after = predict(p, xs);
    for (std::size_t i = 0; i < 5; ++i)
        EXPECT_NEAR(before.probabilities[i], after.probabilities[i], 1e-12);
    EXPECT_EQ(before.predicted, after.predicted);
}

TEST(CrossEntropy, Values) {
    EXPECT_NEAR(cross_entropy(Vector(10), 3), 2.302585092994046, 1e-15);
    EXPECT_NEAR(cross_entropy(Vector{1000, 0}, 0), 0.0, 1e-15);
    EXPECT_NEAR(cross_entropy(Vector{1000, 0}, 1), 1000.0, 1e-9);
    EXPECT_THROW(cross_entropy(Vector(3), 3), InputError);
}

TEST(LossAndGrad, ZeroParamsLossIsLnTen) {
    const ClassifierParams p = ClassifierParams::zeros(CellKind::MGU2, 3, 2, 10);
    SeededRng rng(5);
    EXPECT_NEAR(loss_and_grad(p, random_sequence(4, 2, rng), 7).loss, std::log(10.0), 1e-15);
}

// Pre-update loss of a freshly initialised classifier sits near ln 10. The
// Glorot readout adds logit spread, so the gap depends on how energetic the
// final state is: dense uniform inputs stay within 10%, MNIST rows within 5%
// (gated cells mostly under 1%).
TEST(LossAndGrad, FreshInitNearLnTen) {
    for (CellKind kind : kAllCellKinds) {
        SeededRng rng(6);
        const ClassifierParams p = init_classifier(kind, 50, 28, 10, rng);
        Real total = 0.0;
        for (int i = 0; i < 100; ++i)
            total += loss_and_grad(p, random_sequence(28, 28, rng, 0.0, 1.0), i % 10).loss;
        EXPECT_NEAR(total / 100.0, std::log(10.0), 0.10 * std::log(10.0)) << cell_name(kind);
    }
}

TEST(LossAndGrad, FreshInitNearLnTenOnMnist) {
    const char* dir = std::getenv("GRNN_DATA_DIR");
    if (dir == nullptr || *dir == '\0') GTEST_SKIP() << "GRNN_DATA_DIR not set";
    const SequenceDataset d = to_row_sequences(load_mnist_dir(dir).train.head(500));
    for (CellKind kind : kAllCellKinds) {
        SeededRng rng(1);
        const ClassifierParams p = init_classifier(kind, 50, 28, 10, rng);
        Real total = 0.0;
        for (const auto& ex : d.examples) total += cross_entropy(predict(p, ex.xs).logits, ex.label);
        EXPECT_NEAR(total / 500.0, std::log(10.0), 0.05 * std::log(10.0)) << cell_name(kind);
    }
}

TEST(LossAndGrad, BadLabelThrows) {
    const ClassifierParams p = ClassifierParams::zeros(CellKind::MGU, 2, 2, 3);
    EXPECT_THROW(loss_and_grad(p, Matrix(2, 2), 3), InputError);
}

TEST(LossAndGrad, AccumulateAddsUp) {
    SeededRng rng(7);
    const ClassifierParams p = random_classifier(CellKind::LSTM, 3, 2, 4, rng);
    const Matrix a = random_sequence(3, 2, rng), b = random_sequence(5, 2, rng);
    ClassifierParams accum = ClassifierParams::zeros(CellKind::LSTM, 3, 2, 4);
    const Real la = accumulate_loss_and_grad(p, a, 1, accum);
    const Real lb = accumulate_loss_and_grad(p, b, 2, accum);
    const LossAndGrad ga = loss_and_grad(p, a, 1), gb = loss_and_grad(p, b, 2);
    EXPECT_EQ(la, ga.loss);
    EXPECT_EQ(lb, gb.loss);
    const auto sum = enumerate_flat(accum);
    const auto fa = enumerate_flat(ga.grads), fb = enumerate_flat(gb.grads);
    for (std::size_t i = 0; i < sum.size(); ++i) EXPECT_NEAR(sum[i], fa[i] + fb[i], 1e-14);
}

// End-to-end derivative check through readout, softmax and cross-entropy,
// using central differences written here rather than the library checker.
TEST(LossAndGrad, MatchesCentralDifferences) {
    SeededRng rng(8);
    for (CellKind kind : kAllCellKinds) {
        const ClassifierParams p = random_classifier(kind, 3, 2, 3, rng);
        const Matrix xs = random_sequence(4, 2, rng);
        const std::size_t label = rng.uniform_index(3);
        const auto analytic = enumerate_flat(loss_and_grad(p, xs, label).grads);
        std::vector<Real> flat = enumerate_flat(p);
        ASSERT_EQ(analytic.size(), flat.size());
        const Real eps = 1e-5;
        Real worst = 0.0;
        for (std::size_t i = 0; i < flat.size(); ++i) {
            ClassifierParams q = p;
            const Real saved = flat[i];
            flat[i] = saved + eps;
            assign_flat(q, flat);
            const Real up = cross_entropy(predict(q, xs).logits, label);
            flat[i] = saved - eps;
            assign_flat(q, flat);
            const Real down = cross_entropy(predict(q, xs).logits, label);
            flat[i] = saved;
            const Real numeric = (up - down) / (2 * eps);
            const Real err = std::abs(analytic[i] - numeric) /
                             std::max(1e-8, std::abs(analytic[i]) + std::abs(numeric));
            worst = std::max(worst, err);
        }
        EXPECT_LT(worst, 1e-5) << cell_name(kind);
    }
}

TEST(ClassifierFlat, RoundTripAndOrder) {
    SeededRng rng(9);
    const ClassifierParams p = random_classifier(CellKind::MGU3, 3, 2, 4, rng);
    const auto flat = enumerate_flat(p);
    EXPECT_EQ(flat.size(), param_count(CellKind::MGU3, 3, 2) + 4 * 3 + 4);
    EXPECT_EQ(flat[param_count(CellKind::MGU3, 3, 2)], p.readout(0, 0));
    EXPECT_EQ(flat.back(), p.readout_bias[3]);
    ClassifierParams q = ClassifierParams::zeros(CellKind::MGU3, 3, 2, 4);
    assign_flat(q, flat);
    EXPECT_EQ(p, q);
    EXPECT_THROW(assign_flat(q, std::span<const Real>(flat).first(flat.size() - 1)),
                 DimensionError);
}

TEST(InitClassifier, ReadoutBiasZeroAndDeterministic) {
    SeededRng a(10), b(10);
    const ClassifierParams p = init_classifier(CellKind::MGU, 6, 4, 10, a);
    EXPECT_EQ(p, init_classifier(CellKind::MGU, 6, 4, 10, b));
    EXPECT_EQ(p.readout_bias, Vector(10));
    const Real bound = std::sqrt(6.0 / 16.0);
    for (Real v : p.readout.span()) EXPECT_LE(std::abs(v), bound);
}

// A classifier whose logits depend only on the first input of the sequence:
// zero candidate recurrence, SRNN, readout copies h.
ClassifierParams first_input_probe() {
    ClassifierParams p = ClassifierParams::zeros(CellKind::SRNN, 2, 2, 2);
    (*p.cell.candidate.w)(0, 0) = 1;
    (*p.cell.candidate.w)(1, 1) = 1;
    p.readout(0, 0) = 1;
    p.readout(1, 1) = 1;
    return p;
}

LabeledSequence seq_pointing_to(std::size_t cls, std::size_t label) {
    Matrix xs(1, 2);
    xs(0, cls) = 1.0;
    return {xs, label, 0};
}

TEST(Accuracy, HandCases) {
    const ClassifierParams p = first_input_probe();
    std::vector<LabeledSequence> right, wrong, mixed;
    for (std::size_t i = 0; i < 10; ++i) {
        right.push_back(seq_pointing_to(i % 2, i % 2));
        wrong.push_back(seq_pointing_to(i % 2, 1 - i % 2));
        mixed.push_back(seq_pointing_to(i % 2, i < 3 ? i % 2 : 1 - i % 2));
    }
    EXPECT_EQ(accuracy(p, dataset_of(right, 2)), 1.0);
    EXPECT_EQ(accuracy(p, dataset_of(wrong, 2)), 0.0);
    EXPECT_NEAR(accuracy(p, dataset_of(mixed, 2)), 0.3, 1e-15);
}

TEST(Accuracy, PermutationInvariantAndEmptyThrows) {
    SeededRng rng(11);
    const ClassifierParams p = random_classifier(CellKind::MGU, 3, 2, 3, rng);
    std::vector<LabeledSequence> ex;
    for (std::size_t i = 0; i < 30; ++i) ex.push_back({random_sequence(4, 2, rng), i % 3, i});
    const Real base = accuracy(p, dataset_of(ex, 3));
    std::reverse(ex.begin(), ex.end());
    EXPECT_EQ(accuracy(p, dataset_of(ex, 3)), base);
    EXPECT_THROW(accuracy(p, SequenceDataset{}), InputError);
}

} // namespace
} // namespace grnn
