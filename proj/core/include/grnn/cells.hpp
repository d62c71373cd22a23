#pragma once

// The seven recurrent cell variants: parameter schemas, parameter counts and
// the single-timestep forward map.
//
//   SRNN  h' = tanh(U h + W x + b)
//   LSTM  c' = f*c + i*tanh(U h + W x + b),  h' = o*tanh(c')
//   GRU   h' = (1-z)*h + z*tanh(U (r*h) + W x + b)
//   MGU   h' = (1-f)*h + f*tanh(U (f*h) + W x + b)
//
// with every gate g = sigmoid(U_g h + W_g x + b_g). The MGU variants keep the
// MGU state update and shrink the forget gate:
//
//   MGU1  f = sigmoid(U_f h + b_f)
//   MGU2  f = sigmoid(U_f h)
//   MGU3  f = sigmoid(b_f)

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "grnn/numkernel.hpp"

namespace grnn {

enum class CellKind : std::uint8_t { SRNN = 0, LSTM = 1, GRU = 2, MGU = 3, MGU1 = 4, MGU2 = 5, MGU3 = 6 };

inline constexpr std::array<CellKind, 7> kAllCellKinds = {
    CellKind::SRNN, CellKind::LSTM, CellKind::GRU,  CellKind::MGU,
    CellKind::MGU1, CellKind::MGU2, CellKind::MGU3,
};

// Lower-case CLI spelling ("srnn", "mgu2", ...).
std::string_view cell_name(CellKind kind) noexcept;
std::optional<CellKind> parse_cell_kind(std::string_view name) noexcept;

// Gate positions inside CellParams::gates, in the order the gates' equations
// are usually written.
namespace gate {
inline constexpr std::size_t kLstmInput = 0;
inline constexpr std::size_t kLstmForget = 1;
inline constexpr std::size_t kLstmOutput = 2;
inline constexpr std::size_t kGruUpdate = 0;
inline constexpr std::size_t kGruReset = 1;
inline constexpr std::size_t kForget = 0;
} // namespace gate

// Which of U (n x n), W (n x m) and b (n) an affine block carries.
struct BlockLayout {
    bool has_u;
    bool has_w;
    bool has_b;
};

// One affine map  a = U h + W x + b  where any term may be absent.
struct AffineBlock {
    std::optional<Matrix> u;
    std::optional<Matrix> w;
    std::optional<Vector> b;

    static AffineBlock zeros(BlockLayout layout, std::size_t n, std::size_t m);

    BlockLayout layout() const noexcept { return {u.has_value(), w.has_value(), b.has_value()}; }
    std::size_t scalar_count() const noexcept;

    // out = U h + W x + b (absent terms contribute nothing).
    void preactivation(std::span<const Real> h, std::span<const Real> x, std::span<Real> out) const;

    friend bool operator==(const AffineBlock&, const AffineBlock&) = default;
};

bool has_memory_cell(CellKind kind) noexcept;
std::vector<BlockLayout> gate_layouts(CellKind kind);

struct CellParams {
    CellKind kind = CellKind::SRNN;
    std::size_t n = 0; // hidden size
    std::size_t m = 0; // input size
    AffineBlock candidate;
    std::vector<AffineBlock> gates;

    // Correctly shaped parameters with every entry zero. Also used as the
    // gradient accumulator for a cell.
    static CellParams zeros(CellKind kind, std::size_t n, std::size_t m);

    std::size_t scalar_count() const noexcept;
    bool same_schema(const CellParams& other) const noexcept;

    friend bool operator==(const CellParams&, const CellParams&) = default;
};

std::size_t param_count(CellKind kind, std::size_t n, std::size_t m);

// W-type matrices Glorot-uniform, U-type matrices orthogonal, biases zero.
CellParams init_params(CellKind kind, std::size_t n, std::size_t m, SeededRng& rng);

// Canonical flat order: candidate U, W, b, then each gate block in order
// (U, W, b, whichever are present). Matrices are row-major.
std::vector<Real> enumerate_flat(const CellParams& params);
void write_flat(const CellParams& params, std::span<Real> out);
CellParams from_flat(CellKind kind, std::size_t n, std::size_t m, std::span<const Real> flat);
void assign_flat(CellParams& params, std::span<const Real> flat);

struct RecurrentState {
    Vector h;
    std::optional<Vector> c; // LSTM only

    // h0 = 0, and c0 = 0 for the LSTM.
    static RecurrentState initial(CellKind kind, std::size_t n);

    friend bool operator==(const RecurrentState&, const RecurrentState&) = default;
};

// Everything step_backward needs to differentiate one timestep.
struct StepCache {
    Vector x;
    Vector h_prev;
    std::optional<Vector> c_prev;
    std::vector<Vector> gates; // activations, same order as CellParams::gates
    Vector candidate;
    std::optional<Vector> tanh_c; // LSTM only
};

struct StepResult {
    RecurrentState state;
    StepCache cache;
};

StepResult step_forward(const CellParams& params, const RecurrentState& state,
                        std::span<const Real> x);

} // namespace grnn
