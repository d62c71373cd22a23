#include "grnn/cells.hpp"

#include <cmath>
#include <string>

#include "grnn/errors.hpp"

namespace grnn {

namespace {

constexpr BlockLayout kFull{true, true, true};

void check_len(std::size_t got, std::size_t want, const char* what) {
    if (got != want) {
        throw DimensionError(std::string(what) + ": expected length " + std::to_string(want) +
                             ", got " + std::to_string(got));
    }
}

// (1 - g) * h + g * candidate
Vector interpolate(const Vector& g, const Vector& h, const Vector& candidate) {
    Vector out(h.size());
    for (std::size_t j = 0; j < h.size(); ++j) {
        out[j] = (1.0 - g[j]) * h[j] + g[j] * candidate[j];
    }
    return out;
}

Vector gate_activation(const AffineBlock& block, const Vector& h, std::span<const Real> x) {
    Vector a(h.size());
    block.preactivation(h.span(), x, a.span());
    for (Real& v : a) v = sigmoid(v);
    return a;
}

// tanh(U (g * h) + W x + b)
Vector gated_candidate(const AffineBlock& block, const Vector& g, const Vector& h,
                       std::span<const Real> x) {
    Vector gh(h.size());
    for (std::size_t j = 0; j < h.size(); ++j) gh[j] = g[j] * h[j];
    Vector a(h.size());
    block.preactivation(gh.span(), x, a.span());
    for (Real& v : a) v = std::tanh(v);
    return a;
}

template <typename Fn>
void for_each_array(CellParams& p, Fn&& fn) {
    auto visit = [&](AffineBlock& block) {
        if (block.u) fn(block.u->span());
        if (block.w) fn(block.w->span());
        if (block.b) fn(block.b->span());
    };
    visit(p.candidate);
    for (auto& g : p.gates) visit(g);
}

template <typename Fn>
void for_each_array(const CellParams& p, Fn&& fn) {
    auto visit = [&](const AffineBlock& block) {
        if (block.u) fn(block.u->span());
        if (block.w) fn(block.w->span());
        if (block.b) fn(block.b->span());
    };
    visit(p.candidate);
    for (const auto& g : p.gates) visit(g);
}

} // namespace

std::string_view cell_name(CellKind kind) noexcept {
    switch (kind) {
    case CellKind::SRNN: return "srnn";
    case CellKind::LSTM: return "lstm";
    case CellKind::GRU: return "gru";
    case CellKind::MGU: return "mgu";
    case CellKind::MGU1: return "mgu1";
    case CellKind::MGU2: return "mgu2";
    case CellKind::MGU3: return "mgu3";
    }
    return "?";
}

std::optional<CellKind> parse_cell_kind(std::string_view name) noexcept {
    for (CellKind k : kAllCellKinds) {
        if (cell_name(k) == name) return k;
    }
    return std::nullopt;
}

AffineBlock AffineBlock::zeros(BlockLayout layout, std::size_t n, std::size_t m) {
    AffineBlock block;
    if (layout.has_u) block.u = Matrix(n, n);
    if (layout.has_w) block.w = Matrix(n, m);
    if (layout.has_b) block.b = Vector(n);
    return block;
}

std::size_t AffineBlock::scalar_count() const noexcept {
    return (u ? u->size() : 0) + (w ? w->size() : 0) + (b ? b->size() : 0);
}

void AffineBlock::preactivation(std::span<const Real> h, std::span<const Real> x,
                                std::span<Real> out) const {
    if (b) {
        check_len(out.size(), b->size(), "bias");
        std::copy(b->begin(), b->end(), out.begin());
    } else {
        std::fill(out.begin(), out.end(), 0.0);
    }
    if (u) matvec_add(*u, h, out);
    if (w) matvec_add(*w, x, out);
}

bool has_memory_cell(CellKind kind) noexcept { return kind == CellKind::LSTM; }

std::vector<BlockLayout> gate_layouts(CellKind kind) {
    switch (kind) {
    case CellKind::SRNN: return {};
    case CellKind::LSTM: return {kFull, kFull, kFull};
    case CellKind::GRU: return {kFull, kFull};
    case CellKind::MGU: return {kFull};
    case CellKind::MGU1: return {{true, false, true}};
    case CellKind::MGU2: return {{true, false, false}};
    case CellKind::MGU3: return {{false, false, true}};
    }
    return {};
}

CellParams CellParams::zeros(CellKind kind, std::size_t n, std::size_t m) {
    if (n == 0 || m == 0) throw DimensionError("cell sizes must be at least 1");
    CellParams p;
    p.kind = kind;
    p.n = n;
    p.m = m;
    p.candidate = AffineBlock::zeros(kFull, n, m);
    for (BlockLayout layout : gate_layouts(kind)) p.gates.push_back(AffineBlock::zeros(layout, n, m));
    return p;
}

std::size_t CellParams::scalar_count() const noexcept {
    std::size_t total = candidate.scalar_count();
    for (const auto& g : gates) total += g.scalar_count();
    return total;
}

bool CellParams::same_schema(const CellParams& other) const noexcept {
    return kind == other.kind && n == other.n && m == other.m;
}

std::size_t param_count(CellKind kind, std::size_t n, std::size_t m) {
    const std::size_t block = n * n + n * m + n;
    switch (kind) {
    case CellKind::SRNN: return block;
    case CellKind::LSTM: return 4 * block;
    case CellKind::GRU: return 3 * block;
    case CellKind::MGU: return 2 * block;
    case CellKind::MGU1: return 2 * block - n * m;
    case CellKind::MGU2: return 2 * block - n * (m + 1);
    case CellKind::MGU3: return 2 * block - n * (n + m);
    }
    return 0;
}

CellParams init_params(CellKind kind, std::size_t n, std::size_t m, SeededRng& rng) {
    CellParams p = CellParams::zeros(kind, n, m);
    auto draw = [&](AffineBlock& block) {
        if (block.u) block.u = orthogonal_init(rng, n);
        if (block.w) block.w = glorot_uniform(rng, n, m);
    };
    draw(p.candidate);
    for (auto& g : p.gates) draw(g);
    return p;
}

std::vector<Real> enumerate_flat(const CellParams& params) {
    std::vector<Real> flat(params.scalar_count());
    write_flat(params, flat);
    return flat;
}

void write_flat(const CellParams& params, std::span<Real> out) {
    check_len(out.size(), params.scalar_count(), "flat parameter buffer");
    std::size_t pos = 0;
    for_each_array(params, [&](std::span<const Real> a) {
        std::copy(a.begin(), a.end(), out.begin() + static_cast<std::ptrdiff_t>(pos));
        pos += a.size();
    });
}

void assign_flat(CellParams& params, std::span<const Real> flat) {
    check_len(flat.size(), params.scalar_count(), "flat parameter buffer");
    std::size_t pos = 0;
    for_each_array(params, [&](std::span<Real> a) {
        std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), a.size(), a.begin());
        pos += a.size();
    });
}

CellParams from_flat(CellKind kind, std::size_t n, std::size_t m, std::span<const Real> flat) {
    CellParams p = CellParams::zeros(kind, n, m);
    assign_flat(p, flat);
    return p;
}

RecurrentState RecurrentState::initial(CellKind kind, std::size_t n) {
    RecurrentState s{Vector(n), std::nullopt};
    if (has_memory_cell(kind)) s.c = Vector(n);
    return s;
}

StepResult step_forward(const CellParams& params, const RecurrentState& state,
                        std::span<const Real> x) {
    const std::size_t n = params.n;
    check_len(x.size(), params.m, "input x");
    check_len(state.h.size(), n, "hidden state h");
    if (has_memory_cell(params.kind)) {
        if (!state.c) throw StateError("LSTM step requires a memory cell state");
        check_len(state.c->size(), n, "memory cell c");
    }

    StepResult r;
    StepCache& cache = r.cache;
    cache.x = Vector(std::vector<Real>(x.begin(), x.end()));
    cache.h_prev = state.h;
    const Vector& h = state.h;

    switch (params.kind) {
    case CellKind::SRNN: {
        cache.candidate = Vector(n);
        params.candidate.preactivation(h.span(), x, cache.candidate.span());
        for (Real& v : cache.candidate) v = std::tanh(v);
        r.state.h = cache.candidate;
        break;
    }
    case CellKind::LSTM: {
        for (const auto& g : params.gates) cache.gates.push_back(gate_activation(g, h, x));
        cache.candidate = Vector(n);
        params.candidate.preactivation(h.span(), x, cache.candidate.span());
        for (Real& v : cache.candidate) v = std::tanh(v);
        const Vector& i = cache.gates[gate::kLstmInput];
        const Vector& f = cache.gates[gate::kLstmForget];
        const Vector& o = cache.gates[gate::kLstmOutput];
        cache.c_prev = *state.c;
        Vector c(n);
        Vector tc(n);
        Vector h_next(n);
        for (std::size_t j = 0; j < n; ++j) {
            c[j] = f[j] * (*state.c)[j] + i[j] * cache.candidate[j];
            tc[j] = std::tanh(c[j]);
            h_next[j] = o[j] * tc[j];
        }
        cache.tanh_c = std::move(tc);
        r.state.h = std::move(h_next);
        r.state.c = std::move(c);
        break;
    }
    case CellKind::GRU: {
        for (const auto& g : params.gates) cache.gates.push_back(gate_activation(g, h, x));
        cache.candidate =
            gated_candidate(params.candidate, cache.gates[gate::kGruReset], h, x);
        r.state.h = interpolate(cache.gates[gate::kGruUpdate], h, cache.candidate);
        break;
    }
    case CellKind::MGU:
    case CellKind::MGU1:
    case CellKind::MGU2:
    case CellKind::MGU3: {
        cache.gates.push_back(gate_activation(params.gates[gate::kForget], h, x));
        const Vector& f = cache.gates[gate::kForget];
        cache.candidate = gated_candidate(params.candidate, f, h, x);
        r.state.h = interpolate(f, h, cache.candidate);
        break;
    }
    }
    return r;
}

} // namespace grnn
