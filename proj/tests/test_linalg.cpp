// Copyright 2026 The OSD Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "osd/error.hpp"
#include "osd/linalg.hpp"
#include "test_util.hpp"

namespace osd::linalg {
namespace {

using osd::testing::naive_matmul;
using osd::testing::random_matrix;

double relative_reconstruction_error(const Matrix& m, const SvdResult& s) {
    Matrix us = s.u;
    for (std::size_t i = 0; i < us.rows(); ++i) {
        for (std::size_t j = 0; j < us.cols(); ++j) us(i, j) *= s.sigma[j];
    }
    const Matrix rec = matmul_nt(us, s.v);
    return frobenius_norm(rec - m) / frobenius_norm(m);
}

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
    const Matrix m = random_matrix(3, 5, 1);
    EXPECT_EQ(matmul(Matrix::identity(3), m), m);
}

TEST(Matmul, ZeroAnnihilates) {
    const Matrix m = random_matrix(4, 3, 2);
    EXPECT_EQ(matmul(m, Matrix(3, 2)), Matrix(4, 2));
}

TEST(Matmul, MatchesTripleLoopExactly) {
    const Matrix a = random_matrix(3, 4, 3);
    const Matrix b = random_matrix(4, 2, 4);
    EXPECT_EQ(matmul(a, b), naive_matmul(a, b));
}

TEST(Matmul, TransposedVariantsAgree) {
    const Matrix a = random_matrix(5, 7, 5);
    const Matrix b = random_matrix(6, 7, 6);
    const Matrix c = random_matrix(5, 3, 7);
    EXPECT_LE(max_abs_diff(matmul_nt(a, b), naive_matmul(a, b.transposed())), 1e-13);
    EXPECT_LE(max_abs_diff(matmul_tn(a, c), naive_matmul(a.transposed(), c)), 1e-13);
}

TEST(Matmul, ShapeMismatchThrows) {
    EXPECT_THROW(matmul(Matrix(2, 3), Matrix(2, 3)), ShapeError);
    EXPECT_THROW(matmul_nt(Matrix(2, 3), Matrix(2, 4)), ShapeError);
    EXPECT_THROW(matmul_tn(Matrix(2, 3), Matrix(3, 3)), ShapeError);
}

TEST(Svd, IdentityHasUnitSingularValues) {
    const auto s = svd(Matrix::identity(3));
    ASSERT_EQ(s.sigma.size(), 3u);
    for (double x : s.sigma) EXPECT_NEAR(x, 1.0, 1e-15);
}

TEST(Svd, ZeroMatrixHasZeroSingularValues) {
    const auto s = svd(Matrix(2, 5));
    ASSERT_EQ(s.sigma.size(), 2u);
    EXPECT_EQ(s.sigma[0], 0.0);
    EXPECT_EQ(s.sigma[1], 0.0);
    EXPECT_LE(orthonormality_error(s.u), 1e-12);
    EXPECT_LE(orthonormality_error(s.v), 1e-12);
}

TEST(Svd, ReconstructsRandomMatrices) {
    const std::vector<std::pair<std::size_t, std::size_t>> shapes = {{8, 12}, {12, 8}, {1, 9}, {9, 1},
                                                                      {16, 16}, {64, 128}, {128, 64}};
    std::uint64_t seed = 10;
    for (const auto& [m, n] : shapes) {
        const Matrix a = random_matrix(m, n, seed++);
        const auto s = svd(a);
        ASSERT_EQ(s.sigma.size(), std::min(m, n));
        EXPECT_LE(relative_reconstruction_error(a, s), 1e-9) << m << "x" << n;
        EXPECT_LE(orthonormality_error(s.u), 1e-10) << m << "x" << n;
        EXPECT_LE(orthonormality_error(s.v), 1e-10) << m << "x" << n;
        for (std::size_t i = 1; i < s.sigma.size(); ++i) EXPECT_GE(s.sigma[i - 1], s.sigma[i]);
        EXPECT_GE(s.sigma.back(), 0.0);
    }
}

TEST(Svd, LargeSquareStaysOrthonormal) {
    const Matrix a = random_matrix(256, 256, 99);
    const auto s = svd(a);
    EXPECT_LE(relative_reconstruction_error(a, s), 1e-9);
    EXPECT_LE(orthonormality_error(s.u), 1e-10);
    EXPECT_LE(orthonormality_error(s.v), 1e-10);
}

TEST(Svd, RankDeficientInputKeepsOrthonormalU) {
    const Matrix a = matmul(random_matrix(10, 2, 1), random_matrix(2, 6, 2));
    const auto s = svd(a);
    EXPECT_LE(relative_reconstruction_error(a, s), 1e-9);
    EXPECT_LE(orthonormality_error(s.u), 1e-10);
    EXPECT_EQ(numerical_rank(s.sigma, 1e-8), 2u);
}

TEST(Svd, Deterministic) {
    const Matrix a = random_matrix(7, 11, 3);
    const auto s1 = svd(a);
    const auto s2 = svd(a);
    EXPECT_EQ(s1.u, s2.u);
    EXPECT_EQ(s1.v, s2.v);
    EXPECT_EQ(s1.sigma, s2.sigma);
}

TEST(Svd, RejectsNonFiniteInput) {
    Matrix a = random_matrix(3, 3, 4);
    a(1, 1) = std::nan("");
    EXPECT_THROW(svd(a), NumericError);
}

TEST(NumericalRank, CountsStrictlyAboveTau) {
    const std::vector<double> s1 = {1.0, 1e-9};
    EXPECT_EQ(numerical_rank(s1, 1e-5), 1u);
    const std::vector<double> s2 = {0.0, 0.0};
    EXPECT_EQ(numerical_rank(s2, 1e-5), 0u);
    const std::vector<double> s3 = {1e-5};
    EXPECT_EQ(numerical_rank(s3, 1e-5), 0u);
}

TEST(NumericalRank, OuterProductSumOfTwoTerms) {
    Matrix m(4, 6);
    for (int t = 0; t < 2; ++t) {
        const Matrix u = random_matrix(4, 1, 20 + t);
        const Matrix v = random_matrix(1, 6, 30 + t);
        m += matmul(u, v);
    }
    EXPECT_EQ(numerical_rank(svd(m).sigma, 1e-5), 2u);
}

TEST(NullSpaceBasis, AxisAlignedRow) {
    const Matrix a_t{{1.0, 0.0, 0.0}};
    const auto basis = null_space_basis(a_t, 1e-5);
    EXPECT_EQ(basis.rank, 1u);
    ASSERT_EQ(basis.v_perp.cols(), 2u);
    const Matrix proj = matmul_nt(basis.v_perp, basis.v_perp);
    Matrix expected(3, 3);
    expected(1, 1) = 1.0;
    expected(2, 2) = 1.0;
    EXPECT_LE(max_abs_diff(proj, expected), 1e-10);
}

TEST(NullSpaceBasis, ZeroTaskMatrixGivesFullBasis) {
    const auto basis = null_space_basis(Matrix(2, 4), 1e-5);
    EXPECT_EQ(basis.rank, 0u);
    EXPECT_EQ(basis.v_perp.rows(), 4u);
    EXPECT_EQ(basis.v_perp.cols(), 4u);
    EXPECT_LE(orthonormality_error(basis.v_perp), 1e-12);
    EXPECT_EQ(basis.input_dim(), 4u);
}

TEST(NullSpaceBasis, RandomResidualAndSplit) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Matrix a_t = random_matrix(4, 16, 40 + seed);
        const auto basis = null_space_basis(a_t, 1e-5);
        EXPECT_EQ(basis.rank, 4u);
        EXPECT_EQ(basis.v_perp.cols(), 12u);
        EXPECT_LE(max_abs(matmul(a_t, basis.v_perp)), 1e-8);
        EXPECT_LE(orthonormality_error(basis.v_perp), 1e-10);
        EXPECT_LE(max_abs(matmul_tn(basis.v_par, basis.v_perp)), 1e-10);
    }
}

TEST(NullSpaceBasis, FullColumnRankIsDegenerate) {
    EXPECT_THROW(null_space_basis(random_matrix(5, 3, 1), 1e-5), DegenerateBasisError);
    EXPECT_THROW(null_space_basis(Matrix(1, 3), 0.0), ArgumentError);
}

TEST(CrossOverlap, OrthogonalRowsGiveZero) {
    EXPECT_EQ(cross_overlap(Matrix{{1.0, 0.0}}, Matrix{{0.0, 1.0}}), 0.0);
}

TEST(CrossOverlap, SelfOverlapOfOrthonormalRowsIsRank) {
    const auto s = svd(random_matrix(10, 3, 5));
    const Matrix rows = s.v.transposed();  // 3 orthonormal rows
    EXPECT_NEAR(cross_overlap(rows, rows), 3.0, 1e-12);
}

TEST(CrossOverlap, MatchesTraceIdentity) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Matrix a_t = random_matrix(4, 20, 100 + seed);
        const Matrix a_k = random_matrix(3, 20, 200 + seed);
        const double direct = cross_overlap(a_t, a_k);
        EXPECT_NEAR(direct, cross_overlap_trace(a_t, a_k), 1e-10 * std::max(1.0, direct));
    }
}

TEST(CrossOverlap, ShapeMismatchThrows) {
    EXPECT_THROW(cross_overlap(Matrix(2, 3), Matrix(2, 4)), ShapeError);
}

TEST(Cosine, BasicCases) {
    const std::vector<double> u = {1.0, 2.0, 3.0};
    EXPECT_NEAR(cosine(u, u), 1.0, 1e-15);
    const std::vector<double> a = {1.0, 0.0};
    const std::vector<double> b = {0.0, 2.0};
    EXPECT_EQ(cosine(a, b), 0.0);
    const std::vector<double> z = {0.0, 0.0};
    EXPECT_THROW(cosine(z, z), UndefinedSimilarityError);
    EXPECT_EQ(cosine(a, z), 0.0);
    const std::vector<double> c = {1.0};
    EXPECT_THROW(cosine(a, c), ShapeError);
}

TEST(Cosine, MatchesExtendedPrecisionOracle) {
    const Matrix u = random_matrix(1, 500, 7);
    const Matrix v = random_matrix(1, 500, 8);
    long double dot = 0, nu = 0, nv = 0;
    for (std::size_t i = 0; i < 500; ++i) {
        dot += static_cast<long double>(u(0, i)) * v(0, i);
        nu += static_cast<long double>(u(0, i)) * u(0, i);
        nv += static_cast<long double>(v(0, i)) * v(0, i);
    }
    const double oracle = static_cast<double>(dot / std::sqrt(nu * nv));
    EXPECT_NEAR(cosine(u.values(), v.values()), oracle, 1e-12);
}

TEST(HashValues, SensitiveToEveryBit) {
    Matrix a = random_matrix(3, 3, 1);
    const auto h = hash_values(a.values());
    a(2, 2) = std::nextafter(a(2, 2), 1e9);
    EXPECT_NE(h, hash_values(a.values()));
}

}  // namespace
}  // namespace osd::linalg
