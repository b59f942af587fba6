// Copyright 2026 The OSD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace osd::linalg {

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept {
        return {data_.data() + r * cols_, cols_};
    }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    Matrix transposed() const;
    bool all_finite() const noexcept;
    void fill(double v) noexcept;

    Matrix& operator+=(const Matrix& other);
    Matrix& operator-=(const Matrix& other);
    Matrix& operator*=(double s) noexcept;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(double s, Matrix a);

struct SvdResult {
    Matrix u;                   // m x p, orthonormal columns
    std::vector<double> sigma;  // p values, descending, >= 0
    Matrix v;                   // n x p, orthonormal columns
};

struct NullSpaceBasis {
    Matrix v_par;   // d_in x rank
    Matrix v_perp;  // d_in x (d_in - rank)
    std::size_t rank = 0;
    double tau = 0.0;

    std::size_t input_dim() const noexcept { return v_par.rows() == 0 ? v_perp.rows() : v_par.rows(); }
};

/// a * b. Summation runs over k in increasing order for every output entry.
Matrix matmul(const Matrix& a, const Matrix& b);

/// a * b^T without materialising the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);

/// a^T * b without materialising the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);

/// Thin SVD by one-sided Jacobi rotations. For an m x n input the factors have
/// p = min(m, n) columns. Throws NumericError when the sweep cap
/// (100 * max(m, n)) is exhausted.
SvdResult svd(const Matrix& m);

/// Number of singular values strictly greater than tau.
std::size_t numerical_rank(std::span<const double> sigma, double tau);

/// Splits R^{d_in} into the row space of a_t (first rank right singular
/// vectors) and an orthonormal basis of its complement. Throws
/// DegenerateBasisError when a_t has full column rank.
NullSpaceBasis null_space_basis(const Matrix& a_t, double tau);

/// ||a_t * a_k^T||_F^2.
double cross_overlap(const Matrix& a_t, const Matrix& a_k);

/// Same quantity evaluated as tr(a_t a_k^T a_k a_t^T).
double cross_overlap_trace(const Matrix& a_t, const Matrix& a_k);

double cosine(std::span<const double> u, std::span<const double> v);

double frobenius_norm(const Matrix& m);
double max_abs(const Matrix& m);
double max_abs_diff(const Matrix& a, const Matrix& b);

/// Largest |(Q^T Q - I)_{ij}|.
double orthonormality_error(const Matrix& q);

/// FNV-1a over the raw IEEE-754 bytes of the values, in order.
std::uint64_t hash_values(std::span<const double> values, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace osd::linalg
