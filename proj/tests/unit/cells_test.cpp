#include <gtest/gtest.h>

#include <cmath>

#include "grnn/bptt.hpp"
#include "grnn/cells.hpp"
#include "grnn/errors.hpp"
#include "random_params.hpp"
#include "reference_cells.hpp"

namespace grnn {
namespace {

using testing::random_cell;
using testing::random_sequence;

TEST(ParamCount, MnistTableRows) {
    EXPECT_EQ(param_count(CellKind::MGU, 50, 28), 7900u);
    EXPECT_EQ(param_count(CellKind::MGU1, 50, 28), 6500u);
    EXPECT_EQ(param_count(CellKind::MGU2, 50, 28), 6450u);
    EXPECT_EQ(param_count(CellKind::MGU3, 50, 28), 4000u);
    EXPECT_EQ(param_count(CellKind::MGU, 100, 1), 20400u);
    EXPECT_EQ(param_count(CellKind::MGU1, 100, 1), 20300u);
    EXPECT_EQ(param_count(CellKind::MGU2, 100, 1), 20200u);
    EXPECT_EQ(param_count(CellKind::MGU3, 100, 1), 10300u);
}

TEST(ParamCount, ReutersTableRow) {
    EXPECT_EQ(param_count(CellKind::MGU, 250, 1), 126000u);
    EXPECT_EQ(param_count(CellKind::MGU1, 250, 1), 125750u);
    EXPECT_EQ(param_count(CellKind::MGU2, 250, 1), 125500u);
    EXPECT_EQ(param_count(CellKind::MGU3, 250, 1), 63250u);
}

TEST(ParamCount, BaseCellsScaleTheSimpleRnn) {
    for (std::size_t n = 1; n <= 12; ++n) {
        for (std::size_t m = 1; m <= 12; ++m) {
            const std::size_t s = n * n + n * m + n;
            EXPECT_EQ(param_count(CellKind::SRNN, n, m), s);
            EXPECT_EQ(param_count(CellKind::LSTM, n, m), 4 * s);
            EXPECT_EQ(param_count(CellKind::GRU, n, m), 3 * s);
            EXPECT_EQ(param_count(CellKind::MGU, n, m), 2 * s);
        }
    }
}

TEST(ParamCount, VariantReductionsRelativeToMgu) {
    for (std::size_t n = 1; n <= 30; ++n) {
        for (std::size_t m = 1; m <= 30; ++m) {
            const std::size_t mgu = param_count(CellKind::MGU, n, m);
            EXPECT_EQ(mgu - param_count(CellKind::MGU1, n, m), n * m);
            EXPECT_EQ(mgu - param_count(CellKind::MGU2, n, m), n * (m + 1));
            EXPECT_EQ(mgu - param_count(CellKind::MGU3, n, m), n * (n + m));
        }
    }
}

TEST(ParamCount, SchemaMatchesFormulaForEveryKind) {
    for (CellKind kind : kAllCellKinds) {
        for (std::size_t n : {1u, 3u, 7u}) {
            for (std::size_t m : {1u, 4u}) {
                EXPECT_EQ(CellParams::zeros(kind, n, m).scalar_count(), param_count(kind, n, m))
                    << cell_name(kind);
            }
        }
    }
}

TEST(CellKindNames, RoundTrip) {
    for (CellKind kind : kAllCellKinds) EXPECT_EQ(parse_cell_kind(cell_name(kind)), kind);
    EXPECT_FALSE(parse_cell_kind("mgu4").has_value());
}

TEST(InitParams, Mgu3Schema) {
    SeededRng rng(1);
    const CellParams p = init_params(CellKind::MGU3, 4, 2, rng);
    ASSERT_TRUE(p.candidate.u && p.candidate.w && p.candidate.b);
    EXPECT_EQ(p.candidate.u->rows(), 4u);
    EXPECT_EQ(p.candidate.u->cols(), 4u);
    EXPECT_EQ(p.candidate.w->rows(), 4u);
    EXPECT_EQ(p.candidate.w->cols(), 2u);
    ASSERT_EQ(p.gates.size(), 1u);
    const AffineBlock& f = p.gates[0];
    EXPECT_FALSE(f.u.has_value());
    EXPECT_FALSE(f.w.has_value());
    ASSERT_TRUE(f.b.has_value());
    EXPECT_EQ(*p.candidate.b, Vector(4));
    EXPECT_EQ(*f.b, Vector(4));
}

TEST(InitParams, Mgu2HasNoInputWeightsOrBiasInGate) {
    SeededRng rng(2);
    const CellParams p = init_params(CellKind::MGU2, 3, 3, rng);
    ASSERT_EQ(p.gates.size(), 1u);
    EXPECT_TRUE(p.gates[0].u.has_value());
    EXPECT_FALSE(p.gates[0].w.has_value());
    EXPECT_FALSE(p.gates[0].b.has_value());
}

TEST(InitParams, Mgu1KeepsBiasDropsInputWeights) {
    SeededRng rng(3);
    const CellParams p = init_params(CellKind::MGU1, 3, 2, rng);
    EXPECT_TRUE(p.gates[0].u.has_value());
    EXPECT_FALSE(p.gates[0].w.has_value());
    EXPECT_TRUE(p.gates[0].b.has_value());
}

TEST(InitParams, PolicyAndDeterminism) {
    for (CellKind kind : kAllCellKinds) {
        SeededRng a(9), b(9);
        const CellParams p = init_params(kind, 6, 4, a);
        EXPECT_EQ(p, init_params(kind, 6, 4, b));
        EXPECT_EQ(enumerate_flat(p).size(), param_count(kind, 6, 4));
        const Real bound = std::sqrt(6.0 / 10.0);
        auto check = [&](const AffineBlock& blk) {
            if (blk.b) {
                EXPECT_EQ(*blk.b, Vector(6));
            }
            if (blk.w) {
                for (Real x : blk.w->span()) EXPECT_LE(std::abs(x), bound);
            }
            if (blk.u) {
                const Matrix& u = *blk.u;
                for (std::size_t i = 0; i < 6; ++i) {
                    for (std::size_t j = 0; j < 6; ++j) {
                        Real s = 0.0;
                        for (std::size_t r = 0; r < 6; ++r) s += u(r, i) * u(r, j);
                        EXPECT_NEAR(s, i == j ? 1.0 : 0.0, 1e-6);
                    }
                }
            }
        };
        check(p.candidate);
        for (const auto& g : p.gates) check(g);
    }
}

TEST(EnumerateFlat, Lengths) {
    EXPECT_EQ(enumerate_flat(CellParams::zeros(CellKind::MGU, 2, 1)).size(), 16u);
    EXPECT_EQ(enumerate_flat(CellParams::zeros(CellKind::MGU3, 2, 1)).size(), 10u);
}

TEST(EnumerateFlat, DocumentedOrder) {
    // MGU1 n=1 m=1: candidate U, W, b then gate U_f, b_f.
    CellParams p = CellParams::zeros(CellKind::MGU1, 1, 1);
    (*p.candidate.u)(0, 0) = 1;
    (*p.candidate.w)(0, 0) = 2;
    (*p.candidate.b)[0] = 3;
    (*p.gates[0].u)(0, 0) = 4;
    (*p.gates[0].b)[0] = 5;
    EXPECT_EQ(enumerate_flat(p), (std::vector<Real>{1, 2, 3, 4, 5}));
}

TEST(EnumerateFlat, RoundTripIsBitwise) {
    SeededRng rng(10);
    for (CellKind kind : kAllCellKinds) {
        const CellParams p = random_cell(kind, 1 + rng.uniform_index(6), 1 + rng.uniform_index(6),
                                         rng);
        EXPECT_EQ(from_flat(kind, p.n, p.m, enumerate_flat(p)), p);
    }
}

TEST(EnumerateFlat, WrongLengthThrows) {
    CellParams p = CellParams::zeros(CellKind::GRU, 2, 2);
    EXPECT_THROW(assign_flat(p, std::vector<Real>(3)), DimensionError);
}

TEST(StepForward, MguScalarHandExample) {
    CellParams p = CellParams::zeros(CellKind::MGU, 1, 1);
    (*p.candidate.u)(0, 0) = 1;
    (*p.candidate.w)(0, 0) = 1;
    (*p.gates[0].u)(0, 0) = 1;
    (*p.gates[0].w)(0, 0) = 1;
    const StepResult r = step_forward(p, RecurrentState::initial(CellKind::MGU, 1), Vector{1}.span());
    EXPECT_NEAR(r.cache.gates[0][0], 0.7310585786300049, 1e-12);
    EXPECT_NEAR(r.cache.candidate[0], 0.7615941559557649, 1e-12);
    // sigma(1) * tanh(1)
    EXPECT_NEAR(r.state.h[0], 0.5567699411459397, 1e-12);
}

TEST(StepForward, Mgu3GateIsHalfWithZeroBias) {
    SeededRng rng(4);
    CellParams p = random_cell(CellKind::MGU3, 5, 3, rng);
    *p.gates[0].b = Vector(5);
    RecurrentState s{Vector(5), std::nullopt};
    for (int t = 0; t < 10; ++t) {
        const Matrix x = random_sequence(1, 3, rng);
        for (Real& v : s.h) v = rng.uniform(-1, 1);
        const StepResult r = step_forward(p, s, x.row(0));
        for (Real g : r.cache.gates[0]) EXPECT_EQ(g, 0.5);
    }
}

TEST(StepForward, Mgu2GateIsHalfAtZeroState) {
    SeededRng rng(5);
    const CellParams p = random_cell(CellKind::MGU2, 4, 3, rng);
    for (int t = 0; t < 10; ++t) {
        const Matrix x = random_sequence(1, 3, rng, -10, 10);
        const StepResult r =
            step_forward(p, RecurrentState::initial(CellKind::MGU2, 4), x.row(0));
        for (Real g : r.cache.gates[0]) EXPECT_EQ(g, 0.5);
    }
}

TEST(StepForward, SrnnWithZeroParamsStaysAtZero) {
    const CellParams p = CellParams::zeros(CellKind::SRNN, 3, 2);
    const StepResult r =
        step_forward(p, RecurrentState::initial(CellKind::SRNN, 3), Vector{5, -7}.span());
    EXPECT_EQ(r.state.h, Vector(3));
}

TEST(StepForward, MatchesReferenceEquations) {
    SeededRng rng(6);
    for (CellKind kind : kAllCellKinds) {
        for (int trial = 0; trial < 5; ++trial) {
            const std::size_t n = 1 + rng.uniform_index(6);
            const std::size_t m = 1 + rng.uniform_index(6);
            const CellParams p = random_cell(kind, n, m, rng);
            const Matrix xs = random_sequence(6, m, rng);
            RecurrentState s = RecurrentState::initial(kind, n);
            testing::RefState ref = testing::ref_initial(n);
            for (std::size_t t = 0; t < xs.rows(); ++t) {
                s = step_forward(p, s, xs.row(t)).state;
                ref = testing::ref_step(p, ref, {xs.row(t).begin(), xs.row(t).end()});
                for (std::size_t j = 0; j < n; ++j) {
                    EXPECT_NEAR(s.h[j], ref.h[j], 1e-13) << cell_name(kind);
                    if (s.c) {
                        EXPECT_NEAR((*s.c)[j], ref.c[j], 1e-13);
                    }
                }
            }
        }
    }
}

TEST(StepForward, DimensionAndStateErrors) {
    const CellParams mgu = CellParams::zeros(CellKind::MGU, 3, 2);
    const RecurrentState s = RecurrentState::initial(CellKind::MGU, 3);
    EXPECT_THROW(step_forward(mgu, s, Vector{1, 2, 3}.span()), DimensionError);
    EXPECT_THROW(step_forward(mgu, RecurrentState{Vector(2), std::nullopt}, Vector{1, 2}.span()),
                 DimensionError);
    const CellParams lstm = CellParams::zeros(CellKind::LSTM, 3, 2);
    EXPECT_THROW(step_forward(lstm, RecurrentState{Vector(3), std::nullopt}, Vector{1, 2}.span()),
                 StateError);
}

TEST(StepForward, DeterministicBitwise) {
    SeededRng rng(7);
    for (CellKind kind : kAllCellKinds) {
        const CellParams p = random_cell(kind, 4, 3, rng);
        const Matrix x = random_sequence(1, 3, rng);
        const RecurrentState s = RecurrentState::initial(kind, 4);
        EXPECT_EQ(step_forward(p, s, x.row(0)).state, step_forward(p, s, x.row(0)).state);
    }
}

// Cached gates lie strictly inside (0, 1) and candidates inside (-1, 1).
TEST(CellProperties, GateAndCandidateBounds) {
    SeededRng rng(8);
    for (CellKind kind : kAllCellKinds) {
        for (int trial = 0; trial < 10; ++trial) {
            const CellParams p = random_cell(kind, 5, 3, rng);
            const ForwardResult fwd = forward_sequence(p, random_sequence(20, 3, rng));
            for (const auto& step : fwd.tape.steps) {
                for (const auto& g : step.gates) {
                    for (Real v : g) {
                        EXPECT_GT(v, 0.0);
                        EXPECT_LT(v, 1.0);
                    }
                }
                for (Real v : step.candidate) {
                    EXPECT_GT(v, -1.0);
                    EXPECT_LT(v, 1.0);
                }
            }
        }
    }
}

TEST(CellProperties, Mgu3GateConstantAcrossSequence) {
    SeededRng rng(9);
    const CellParams p = random_cell(CellKind::MGU3, 6, 4, rng);
    const Vector expected = sigmoid(*p.gates[0].b);
    const ForwardResult fwd = forward_sequence(p, random_sequence(50, 4, rng));
    for (const auto& step : fwd.tape.steps) EXPECT_EQ(step.gates[0], expected);
}

TEST(CellProperties, Mgu1GateIgnoresInput) {
    SeededRng rng(10);
    const CellParams p = random_cell(CellKind::MGU1, 5, 3, rng);
    RecurrentState s{Vector(5), std::nullopt};
    for (Real& v : s.h) v = rng.uniform(-1, 1);
    const Matrix xa = random_sequence(1, 3, rng);
    const Matrix xb = random_sequence(1, 3, rng);
    const StepResult a = step_forward(p, s, xa.row(0));
    const StepResult b = step_forward(p, s, xb.row(0));
    EXPECT_EQ(a.cache.gates[0], b.cache.gates[0]);
    EXPECT_NE(a.cache.candidate, b.cache.candidate);
}

TEST(CellProperties, GruWithTiedGatesIsMgu) {
    SeededRng rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t n = 1 + rng.uniform_index(6);
        const std::size_t m = 1 + rng.uniform_index(6);
        const CellParams mgu = random_cell(CellKind::MGU, n, m, rng);
        const CellParams gru = testing::tied_gru_from_mgu(mgu);
        const Matrix xs = random_sequence(30, m, rng);
        RecurrentState a = RecurrentState::initial(CellKind::MGU, n);
        RecurrentState b = RecurrentState::initial(CellKind::GRU, n);
        for (std::size_t t = 0; t < xs.rows(); ++t) {
            a = step_forward(mgu, a, xs.row(t)).state;
            b = step_forward(gru, b, xs.row(t)).state;
            for (std::size_t j = 0; j < n; ++j) EXPECT_NEAR(a.h[j], b.h[j], 1e-12);
        }
    }
}

TEST(CellProperties, StateStaysInsideUnitBoxFromZero) {
    SeededRng rng(12);
    for (CellKind kind : kAllCellKinds) {
        if (kind == CellKind::LSTM) continue;
        const CellParams p = random_cell(kind, 6, 3, rng);
        RecurrentState s = RecurrentState::initial(kind, 6);
        const Matrix xs = random_sequence(300, 3, rng);
        for (std::size_t t = 0; t < xs.rows(); ++t) {
            s = step_forward(p, s, xs.row(t)).state;
            for (Real v : s.h) {
                EXPECT_GT(v, -1.0);
                EXPECT_LT(v, 1.0);
            }
        }
    }
}

} // namespace
} // namespace grnn
