// Copyright 2026 The OSD Authors
// SPDX-License-Identifier: Apache-2.0

#include "osd/linalg.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "osd/error.hpp"

namespace osd::linalg {

namespace {

std::string shape_str(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
    }
}

double dot(const double* x, const double* y, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
    return s;
}

using Column = std::vector<double>;

// Returns dim - cols.size() unit vectors orthogonal to the given orthonormal
// columns, taken from the trailing columns of the Householder Q of [cols].
std::vector<Column> complete_basis(const std::vector<Column>& cols, std::size_t dim) {
    const std::size_t k = cols.size();
    std::vector<Column> work = cols;
    std::vector<Column> reflectors;
    reflectors.reserve(k);
    for (std::size_t j = 0; j < k; ++j) {
        Column v(dim, 0.0);
        double norm_sq = 0.0;
        for (std::size_t i = j; i < dim; ++i) {
            v[i] = work[j][i];
            norm_sq += v[i] * v[i];
        }
        const double norm = std::sqrt(norm_sq);
        if (norm == 0.0) {
            reflectors.emplace_back();
            continue;
        }
        v[j] += (v[j] >= 0.0 ? norm : -norm);
        const double vnorm = std::sqrt(dot(v.data() + j, v.data() + j, dim - j));
        for (std::size_t i = j; i < dim; ++i) v[i] /= vnorm;
        for (std::size_t c = j; c < k; ++c) {
            const double proj = 2.0 * dot(v.data() + j, work[c].data() + j, dim - j);
            for (std::size_t i = j; i < dim; ++i) work[c][i] -= proj * v[i];
        }
        reflectors.push_back(std::move(v));
    }

    std::vector<Column> out;
    out.reserve(dim - k);
    for (std::size_t e = k; e < dim; ++e) {
        Column q(dim, 0.0);
        q[e] = 1.0;
        for (std::size_t j = k; j-- > 0;) {
            const Column& v = reflectors[j];
            if (v.empty()) continue;
            const double proj = 2.0 * dot(v.data() + j, q.data() + j, dim - j);
            for (std::size_t i = j; i < dim; ++i) q[i] -= proj * v[i];
        }
        out.push_back(std::move(q));
    }
    return out;
}

Matrix columns_to_matrix(const std::vector<Column>& cols, std::size_t dim) {
    Matrix m(dim, cols.size());
    for (std::size_t c = 0; c < cols.size(); ++c) {
        for (std::size_t r = 0; r < dim; ++r) m(r, c) = cols[c][r];
    }
    return m;
}

SvdResult svd_tall(const Matrix& a) {
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    constexpr double kTol = 1e-12;
    const double eps = std::numeric_limits<double>::epsilon();

    std::vector<Column> g(n, Column(m));
    std::vector<Column> v(n, Column(n, 0.0));
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < m; ++i) g[j][i] = a(i, j);
        v[j][j] = 1.0;
    }
    const double fro = frobenius_norm(a);
    const double abs_floor = (eps * fro) * (eps * fro);

    const long sweep_cap = 100L * static_cast<long>(std::max(m, n));
    long sweeps = 0;
    bool converged = (n < 2);
    while (!converged) {
        if (sweeps >= sweep_cap) {
            throw NumericError("svd: no convergence after " + std::to_string(sweeps) + " sweeps", sweeps);
        }
        ++sweeps;
        bool rotated = false;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                const double alpha = dot(g[i].data(), g[i].data(), m);
                const double beta = dot(g[j].data(), g[j].data(), m);
                const double gamma = dot(g[i].data(), g[j].data(), m);
                if (std::abs(gamma) <= kTol * std::sqrt(alpha * beta) || std::abs(gamma) <= abs_floor) {
                    continue;
                }
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::hypot(1.0, zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t k = 0; k < m; ++k) {
                    const double gi = g[i][k];
                    const double gj = g[j][k];
                    g[i][k] = c * gi - s * gj;
                    g[j][k] = s * gi + c * gj;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vi = v[i][k];
                    const double vj = v[j][k];
                    v[i][k] = c * vi - s * vj;
                    v[j][k] = s * vi + c * vj;
                }
            }
        }
        converged = !rotated;
    }

    std::vector<double> norms(n);
    for (std::size_t j = 0; j < n; ++j) norms[j] = std::sqrt(dot(g[j].data(), g[j].data(), m));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return norms[x] > norms[y]; });

    SvdResult out;
    out.sigma.resize(n);
    const double sigma_max = n > 0 ? norms[order[0]] : 0.0;
    const double cutoff = static_cast<double>(std::max(m, n)) * eps * sigma_max;

    std::vector<Column> ucols;
    std::vector<Column> vcols;
    for (std::size_t idx = 0; idx < n; ++idx) {
        const std::size_t j = order[idx];
        out.sigma[idx] = norms[j];
        vcols.push_back(v[j]);
        if (norms[j] > cutoff && norms[j] > 0.0) {
            Column u(m);
            for (std::size_t k = 0; k < m; ++k) u[k] = g[j][k] / norms[j];
            ucols.push_back(std::move(u));
        }
    }
    if (ucols.size() < n) {
        // Columns with negligible singular values get an orthonormal completion.
        auto extra = complete_basis(ucols, m);
        extra.resize(n - ucols.size());
        for (auto& col : extra) ucols.push_back(std::move(col));
    }
    out.u = columns_to_matrix(ucols, m);
    out.v = columns_to_matrix(vcols, n);
    return out;
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols) {
        throw ShapeError("Matrix: data length " + std::to_string(data_.size()) + " != " +
                         std::to_string(rows) + "x" + std::to_string(cols));
    }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) throw ShapeError("Matrix: ragged initializer list");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    }
    return t;
}

bool Matrix::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

void Matrix::fill(double v) noexcept { std::fill(data_.begin(), data_.end(), v); }

Matrix& Matrix::operator+=(const Matrix& other) {
    require_same_shape(*this, other, "operator+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
    require_same_shape(*this, other, "operator-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
}

Matrix& Matrix::operator*=(double s) noexcept {
    for (double& x : data_) x *= s;
    return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(double s, Matrix a) { return a *= s; }

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: " + shape_str(a) + " * " + shape_str(b));
    }
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto orow = out.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            auto brow = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        throw ShapeError("matmul_nt: " + shape_str(a) + " * (" + shape_str(b) + ")^T");
    }
    Matrix out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* ar = a.row(i).data();
        for (std::size_t j = 0; j < b.rows(); ++j) out(i, j) = dot(ar, b.row(j).data(), a.cols());
    }
    return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) {
        throw ShapeError("matmul_tn: (" + shape_str(a) + ")^T * " + shape_str(b));
    }
    Matrix out(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k) {
        auto arow = a.row(k);
        auto brow = b.row(k);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = arow[i];
            if (aki == 0.0) continue;
            auto orow = out.row(i);
            for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aki * brow[j];
        }
    }
    return out;
}

SvdResult svd(const Matrix& m) {
    if (!m.all_finite()) throw NumericError("svd: input contains non-finite entries");
    if (m.rows() >= m.cols()) return svd_tall(m);
    SvdResult t = svd_tall(m.transposed());
    return SvdResult{std::move(t.v), std::move(t.sigma), std::move(t.u)};
}

std::size_t numerical_rank(std::span<const double> sigma, double tau) {
    return static_cast<std::size_t>(std::count_if(sigma.begin(), sigma.end(), [tau](double s) { return s > tau; }));
}

NullSpaceBasis null_space_basis(const Matrix& a_t, double tau) {
    if (!(tau > 0.0)) throw ArgumentError("null_space_basis: tau must be positive");
    const std::size_t d_in = a_t.cols();
    const SvdResult s = svd(a_t);
    const std::size_t rank = numerical_rank(s.sigma, tau);
    if (rank >= d_in) {
        throw DegenerateBasisError("null_space_basis: numerical rank " + std::to_string(rank) +
                                   " equals input dimension " + std::to_string(d_in) + "; no null space");
    }
    std::vector<Column> par(rank, Column(d_in));
    for (std::size_t c = 0; c < rank; ++c) {
        for (std::size_t r = 0; r < d_in; ++r) par[c][r] = s.v(r, c);
    }
    NullSpaceBasis basis;
    basis.v_perp = columns_to_matrix(complete_basis(par, d_in), d_in);
    basis.v_par = columns_to_matrix(par, d_in);
    basis.rank = rank;
    basis.tau = tau;
    return basis;
}

double cross_overlap(const Matrix& a_t, const Matrix& a_k) {
    if (a_t.cols() != a_k.cols()) {
        throw ShapeError("cross_overlap: input dims differ " + shape_str(a_t) + " vs " + shape_str(a_k));
    }
    const Matrix c = matmul_nt(a_t, a_k);
    double s = 0.0;
    for (double x : c.values()) s += x * x;
    return s;
}

double cross_overlap_trace(const Matrix& a_t, const Matrix& a_k) {
    if (a_t.cols() != a_k.cols()) {
        throw ShapeError("cross_overlap_trace: input dims differ " + shape_str(a_t) + " vs " + shape_str(a_k));
    }
    const Matrix gram = matmul_tn(a_k, a_k);  // A_K^T A_K
    double trace = 0.0;
    for (std::size_t i = 0; i < a_t.rows(); ++i) {
        auto t = a_t.row(i);
        for (std::size_t p = 0; p < gram.rows(); ++p) {
            trace += t[p] * dot(gram.row(p).data(), t.data(), t.size());
        }
    }
    return trace;
}

double cosine(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) {
        throw ShapeError("cosine: length mismatch " + std::to_string(u.size()) + " vs " + std::to_string(v.size()));
    }
    const double nu = std::sqrt(dot(u.data(), u.data(), u.size()));
    const double nv = std::sqrt(dot(v.data(), v.data(), v.size()));
    if (nu == 0.0 && nv == 0.0) throw UndefinedSimilarityError("cosine: both vectors are zero");
    if (nu == 0.0 || nv == 0.0) return 0.0;
    return std::clamp(dot(u.data(), v.data(), u.size()) / (nu * nv), -1.0, 1.0);
}

double frobenius_norm(const Matrix& m) {
    double s = 0.0;
    for (double x : m.values()) s += x * x;
    return std::sqrt(s);
}

double max_abs(const Matrix& m) {
    double best = 0.0;
    for (double x : m.values()) best = std::max(best, std::abs(x));
    return best;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "max_abs_diff");
    double best = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) best = std::max(best, std::abs(a.values()[i] - b.values()[i]));
    return best;
}

double orthonormality_error(const Matrix& q) {
    const Matrix gram = matmul_tn(q, q);
    return max_abs_diff(gram, Matrix::identity(q.cols()));
}

std::uint64_t hash_values(std::span<const double> values, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (double x : values) {
        auto bits = std::bit_cast<std::uint64_t>(x);
        for (int b = 0; b < 8; ++b) {
            h ^= (bits >> (8 * b)) & 0xffU;
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

}  // namespace osd::linalg
