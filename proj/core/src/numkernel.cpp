#include "grnn/numkernel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "grnn/errors.hpp"

namespace grnn {

namespace {

void require(bool ok, const char* what, std::size_t a, std::size_t b) {
    if (!ok) {
        throw DimensionError(std::string(what) + ": " + std::to_string(a) +
                             " vs " + std::to_string(b));
    }
}

} // namespace

void Vector::fill(Real value) { std::fill(data_.begin(), data_.end(), value); }

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<Real> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
    require(data_.size() == rows * cols, "matrix initialiser length", data_.size(), rows * cols);
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

void Matrix::fill(Real value) { std::fill(data_.begin(), data_.end(), value); }

// ---------------------------------------------------------------------------
// SeededRng

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

Real SeededRng::uniform01() {
    return static_cast<Real>(engine_() >> 11) * 0x1.0p-53;
}

Real SeededRng::uniform(Real lo, Real hi) { return lo + (hi - lo) * uniform01(); }

std::uint64_t SeededRng::uniform_index(std::uint64_t bound) {
    // Reject the top partial block so every residue is equally likely.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % bound;
}

Real SeededRng::normal() {
    Real u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const Real u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

SeededRng SeededRng::fork(std::uint64_t tag) const {
    return SeededRng(splitmix64(seed_ ^ splitmix64(tag)));
}

// ---------------------------------------------------------------------------
// Products

Vector matvec(const Matrix& m, std::span<const Real> v) {
    Vector out(m.rows());
    matvec_add(m, v, out.span());
    return out;
}

void matvec_add(const Matrix& m, std::span<const Real> v, std::span<Real> out) {
    require(m.cols() == v.size(), "matvec columns", m.cols(), v.size());
    require(m.rows() == out.size(), "matvec rows", m.rows(), out.size());
    const std::size_t cols = m.cols();
    const Real* a = m.data();
    const Real* x = v.data();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const Real* row = a + i * cols;
        Real acc = 0.0;
#pragma omp simd reduction(+ : acc)
        for (std::size_t j = 0; j < cols; ++j) acc += row[j] * x[j];
        out[i] += acc;
    }
}

void matvec_transposed_add(const Matrix& m, std::span<const Real> v, std::span<Real> out) {
    require(m.rows() == v.size(), "transposed matvec rows", m.rows(), v.size());
    require(m.cols() == out.size(), "transposed matvec columns", m.cols(), out.size());
    const std::size_t cols = m.cols();
    Real* y = out.data();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const Real s = v[i];
        if (s == 0.0) continue;
        const Real* row = m.data() + i * cols;
#pragma omp simd
        for (std::size_t j = 0; j < cols; ++j) y[j] += s * row[j];
    }
}

void outer_add(Matrix& m, std::span<const Real> a, std::span<const Real> b) {
    require(m.rows() == a.size(), "outer product rows", m.rows(), a.size());
    require(m.cols() == b.size(), "outer product columns", m.cols(), b.size());
    const std::size_t cols = m.cols();
    const Real* x = b.data();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const Real s = a[i];
        if (s == 0.0) continue;
        Real* row = m.data() + i * cols;
#pragma omp simd
        for (std::size_t j = 0; j < cols; ++j) row[j] += s * x[j];
    }
}

Real dot(std::span<const Real> a, std::span<const Real> b) {
    require(a.size() == b.size(), "dot", a.size(), b.size());
    Real acc = 0.0;
    const Real* x = a.data();
    const Real* y = b.data();
#pragma omp simd reduction(+ : acc)
    for (std::size_t i = 0; i < a.size(); ++i) acc += x[i] * y[i];
    return acc;
}

void axpy(Real alpha, std::span<const Real> x, std::span<Real> y) {
    require(x.size() == y.size(), "axpy", x.size(), y.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

// ---------------------------------------------------------------------------
// Nonlinearities

Real sigmoid(Real x) noexcept {
    // Only ever exponentiate a non-positive number.
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const Real e = std::exp(x);
    return e / (1.0 + e);
}

Vector sigmoid(const Vector& v) {
    Vector out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = sigmoid(v[i]);
    return out;
}

Vector tanh_vec(const Vector& v) {
    Vector out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::tanh(v[i]);
    return out;
}

Vector softmax(const Vector& v) {
    Vector out(v.size());
    if (v.empty()) return out;
    const Real peak = *std::max_element(v.begin(), v.end());
    Real total = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] - peak);
        total += out[i];
    }
    for (Real& p : out) p /= total;
    return out;
}

std::size_t argmax(std::span<const Real> v) {
    if (v.empty()) throw DimensionError("argmax of empty vector");
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) best = i;
    }
    return best;
}

// ---------------------------------------------------------------------------
// Initialisers

Matrix glorot_uniform(SeededRng& rng, std::size_t rows, std::size_t cols) {
    const Real limit = std::sqrt(6.0 / static_cast<Real>(rows + cols));
    Matrix m(rows, cols);
    for (Real& x : m.span()) x = rng.uniform(-limit, limit);
    return m;
}

Matrix orthogonal_init(SeededRng& rng, std::size_t n) {
    // Gram-Schmidt with one re-orthogonalisation pass over the columns of a
    // Gaussian matrix. The diagonal of the implied R is positive, which is the
    // sign-corrected QR convention.
    std::vector<std::vector<Real>> cols(n, std::vector<Real>(n));
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) cols[c][r] = rng.normal();
    }
    for (std::size_t j = 0; j < n; ++j) {
        auto& v = cols[j];
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t i = 0; i < j; ++i) {
                const Real proj = dot(cols[i], v);
                axpy(-proj, cols[i], v);
            }
        }
        const Real norm = std::sqrt(dot(v, v));
        for (Real& x : v) x /= norm;
    }
    Matrix q(n, n);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) q(r, c) = cols[c][r];
    }
    return q;
}

bool all_finite(std::span<const Real> v) noexcept {
    return std::all_of(v.begin(), v.end(), [](Real x) { return std::isfinite(x); });
}

} // namespace grnn
