#pragma once

// Dense linear algebra, nonlinearities and seeded initialisation used by the
// rest of the library. Storage is row-major double precision.

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <vector>

namespace grnn {

using Real = double;

class Vector {
public:
    Vector() = default;
    explicit Vector(std::size_t len, Real fill = 0.0) : data_(len, fill) {}
    Vector(std::initializer_list<Real> values) : data_(values) {}
    explicit Vector(std::vector<Real> values) : data_(std::move(values)) {}

    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    Real& operator[](std::size_t i) noexcept { return data_[i]; }
    Real operator[](std::size_t i) const noexcept { return data_[i]; }

    Real* data() noexcept { return data_.data(); }
    const Real* data() const noexcept { return data_.data(); }
    std::span<Real> span() noexcept { return data_; }
    std::span<const Real> span() const noexcept { return data_; }

    auto begin() noexcept { return data_.begin(); }
    auto end() noexcept { return data_.end(); }
    auto begin() const noexcept { return data_.begin(); }
    auto end() const noexcept { return data_.end(); }

    void fill(Real value);

    const std::vector<Real>& values() const noexcept { return data_; }

    friend bool operator==(const Vector&, const Vector&) = default;

private:
    std::vector<Real> data_;
};

class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, Real fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    // Row-major initialiser: Matrix(2, 2, {1, 2, 3, 4}).
    Matrix(std::size_t rows, std::size_t cols, std::vector<Real> values);

    static Matrix identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }

    Real& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    Real operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<Real> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const Real> row(std::size_t r) const noexcept {
        return {data_.data() + r * cols_, cols_};
    }

    Real* data() noexcept { return data_.data(); }
    const Real* data() const noexcept { return data_.data(); }
    std::span<Real> span() noexcept { return data_; }
    std::span<const Real> span() const noexcept { return data_; }

    void fill(Real value);

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<Real> data_;
};

// Deterministic random source. The engine is mt19937_64, whose output sequence
// is fixed by the C++ standard; the distributions are implemented here rather
// than taken from <random> because the standard leaves those unspecified.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next_u64() { return engine_(); }
    // Uniform in [0, 1) with 53 random bits.
    Real uniform01();
    Real uniform(Real lo, Real hi);
    // Uniform integer in [0, bound), rejection sampled; bound > 0.
    std::uint64_t uniform_index(std::uint64_t bound);
    // Standard normal via Box-Muller.
    Real normal();

    // Independent child stream keyed by `tag`, derived with splitmix64.
    SeededRng fork(std::uint64_t tag) const;

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

// Products. The accumulate variants are the hot paths used by the cells and
// BPTT engine; none of them allocate.
Vector matvec(const Matrix& m, std::span<const Real> v);
// out += M v
void matvec_add(const Matrix& m, std::span<const Real> v, std::span<Real> out);
// out += M^T v
void matvec_transposed_add(const Matrix& m, std::span<const Real> v, std::span<Real> out);
// M += a b^T
void outer_add(Matrix& m, std::span<const Real> a, std::span<const Real> b);

Real dot(std::span<const Real> a, std::span<const Real> b);
// y += alpha x
void axpy(Real alpha, std::span<const Real> x, std::span<Real> y);

Real sigmoid(Real x) noexcept;
Vector sigmoid(const Vector& v);
Vector tanh_vec(const Vector& v);
Vector softmax(const Vector& v);
// Index of the largest entry, lowest index on ties. Requires non-empty input.
std::size_t argmax(std::span<const Real> v);

Matrix glorot_uniform(SeededRng& rng, std::size_t rows, std::size_t cols);
Matrix orthogonal_init(SeededRng& rng, std::size_t n);

bool all_finite(std::span<const Real> v) noexcept;

} // namespace grnn
