// Copyright 2026 The OSD Authors
// SPDX-License-Identifier: Apache-2.0

#include <memory>

#include <gtest/gtest.h>

#include "osd/adapters.hpp"
#include "osd/error.hpp"
#include "test_util.hpp"

namespace osd::adapters {
namespace {

using linalg::Matrix;
using osd::testing::naive_matmul;
using osd::testing::random_matrix;

const SiteId kUp{0, SiteKind::mlp_up};
const SiteId kDown{0, SiteKind::mlp_down};

KnowledgeAdapter random_knowledge(std::uint64_t seed, std::size_t rank = 3, std::size_t d = 6, std::size_t f = 10) {
    KnowledgeAdapter k;
    k.doc_id = "doc" + std::to_string(seed);
    k.variant = Variant::soft;
    k.rank = rank;
    k.layers.push_back({kUp, random_matrix(rank, d, seed * 4 + 1), random_matrix(f, rank, seed * 4 + 2)});
    k.layers.push_back({kDown, random_matrix(rank, f, seed * 4 + 3), random_matrix(d, rank, seed * 4 + 4)});
    return k;
}

TaskAdapter random_task(std::uint64_t seed, std::size_t rank = 2, std::size_t d = 6, std::size_t f = 10) {
    TaskAdapter t;
    t.rank = rank;
    t.layers.push_back({kUp, random_matrix(rank, d, seed * 4 + 1), random_matrix(f, rank, seed * 4 + 2)});
    t.layers.push_back({kDown, random_matrix(rank, f, seed * 4 + 3), random_matrix(d, rank, seed * 4 + 4)});
    return t;
}

TEST(SiteId, StringRoundTripAndOrder) {
    const SiteId s{3, SiteKind::mlp_down};
    EXPECT_EQ(s.str(), "L3.mlp_down");
    EXPECT_EQ(SiteId::parse("L3.mlp_down"), s);
    EXPECT_THROW(SiteId::parse("L3.attn"), FormatError);
    EXPECT_LT(kUp, kDown);
    EXPECT_LT(kDown, (SiteId{1, SiteKind::mlp_up}));
}

TEST(DeltaW, ZeroBGivesZero) {
    const LoraLayer l{kUp, random_matrix(2, 5, 1), Matrix(4, 2)};
    EXPECT_EQ(delta_w(l), Matrix(4, 5));
}

TEST(DeltaW, RankOneUnit) {
    Matrix a(1, 3);
    a(0, 0) = 1.0;
    Matrix b(3, 1);
    b(0, 0) = 1.0;
    Matrix e11(3, 3);
    e11(0, 0) = 1.0;
    EXPECT_EQ(delta_w({kUp, a, b}), e11);
}

TEST(DeltaW, MatchesTripleLoop) {
    const Matrix a = random_matrix(4, 7, 2);
    const Matrix b = random_matrix(5, 4, 3);
    EXPECT_EQ(delta_w({kUp, a, b}), naive_matmul(b, a));
}

TEST(DeltaW, RankMismatchThrows) {
    EXPECT_THROW(delta_w({kUp, Matrix(2, 3), Matrix(3, 3)}), ShapeError);
}

TEST(ExpandHard, ZeroAndAxisCases) {
    const auto basis = linalg::null_space_basis(Matrix{{1.0, 0.0, 0.0}}, 1e-5);
    EXPECT_EQ(expand_hard(Matrix(1, 2), basis), Matrix(1, 3));
    const Matrix a_k = expand_hard(Matrix{{1.0, 0.0}}, basis);
    EXPECT_EQ(a_k(0, 0), 0.0);
    EXPECT_LE(linalg::max_abs(linalg::matmul_nt(a_k, Matrix{{1.0, 0.0, 0.0}})), 1e-15);
    EXPECT_THROW(expand_hard(Matrix(1, 3), basis), ShapeError);
}

TEST(ExpandHard, RandomResidual) {
    const Matrix a_t = random_matrix(4, 16, 5);
    const auto basis = linalg::null_space_basis(a_t, 1e-5);
    const Matrix a_k = expand_hard(random_matrix(4, basis.v_perp.cols(), 6), basis);
    EXPECT_LE(linalg::max_abs(linalg::matmul_nt(a_k, a_t)), 1e-10);
}

TEST(OverlapPenalty, HardAdapterIsZero) {
    const TaskAdapter t = random_task(1);
    KnowledgeAdapter k = random_knowledge(2);
    k.variant = Variant::hard;
    for (const auto& l : t.layers) {
        auto basis = std::make_shared<const linalg::NullSpaceBasis>(linalg::null_space_basis(l.a, 1e-5));
        k.a_hat.push_back(random_matrix(3, basis->v_perp.cols(), 9));
        k.bases.push_back(basis);
    }
    k.sync_hard();
    EXPECT_LE(overlap_penalty(t, k), 1e-18);
    EXPECT_THROW(overlap_penalty_grad(t, k), UnsupportedVariantError);
}

TEST(OverlapPenalty, SelfOverlapOfOrthonormalRows) {
    const auto s = linalg::svd(random_matrix(6, 6, 3));
    Matrix rows(2, 6);
    for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t j = 0; j < 6; ++j) rows(i, j) = s.v(j, i);
    }
    TaskAdapter t;
    t.rank = 2;
    t.layers.push_back({kUp, rows, Matrix(4, 2)});
    KnowledgeAdapter k;
    k.rank = 2;
    k.layers.push_back({kUp, rows, Matrix(4, 2)});
    EXPECT_NEAR(overlap_penalty(t, k), 2.0, 1e-12);
}

TEST(OverlapPenalty, MatchesTraceIdentity) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const TaskAdapter t = random_task(seed + 10);
        const KnowledgeAdapter k = random_knowledge(seed + 20);
        const double direct = overlap_penalty(t, k);
        EXPECT_NEAR(direct, overlap_penalty_trace(t, k), 1e-9 * std::max(1.0, direct));
    }
}

TEST(OverlapPenalty, SiteMismatchThrows) {
    const TaskAdapter t = random_task(1);
    KnowledgeAdapter k = random_knowledge(2);
    k.layers.pop_back();
    EXPECT_THROW(overlap_penalty(t, k), StructuralError);
}

TEST(OverlapPenaltyGrad, OrthogonalRowsGiveZero) {
    TaskAdapter t;
    t.layers.push_back({kUp, Matrix{{1.0, 0.0, 0.0}}, Matrix(2, 1)});
    KnowledgeAdapter k;
    k.layers.push_back({kUp, Matrix{{0.0, 2.0, -1.0}}, Matrix(2, 1)});
    EXPECT_EQ(overlap_penalty_grad(t, k)[0], Matrix(1, 3));
}

TEST(OverlapPenaltyGrad, IdentityTaskGivesTwiceA) {
    TaskAdapter t;
    t.layers.push_back({kUp, Matrix::identity(4), Matrix(3, 4)});
    KnowledgeAdapter k;
    const Matrix a_k = random_matrix(2, 4, 1);
    k.layers.push_back({kUp, a_k, Matrix(3, 2)});
    EXPECT_LE(linalg::max_abs_diff(overlap_penalty_grad(t, k)[0], 2.0 * a_k), 1e-15);
}

TEST(OverlapPenaltyGrad, MatchesCentralDifferencesAtEverySite) {
    const TaskAdapter t = random_task(3);
    KnowledgeAdapter k = random_knowledge(4);
    const auto grads = overlap_penalty_grad(t, k);
    const double h = 1e-6;
    for (std::size_t s = 0; s < k.layers.size(); ++s) {
        auto a = k.layers[s].a.values();
        for (std::size_t e = 0; e < a.size(); ++e) {
            const double orig = a[e];
            a[e] = orig + h;
            const double up = overlap_penalty(t, k);
            a[e] = orig - h;
            const double down = overlap_penalty(t, k);
            a[e] = orig;
            const double fd = (up - down) / (2.0 * h);
            const double an = grads[s].values()[e];
            EXPECT_LE(std::abs(fd - an) / std::max(1.0, std::abs(an)), 1e-5) << "site " << s << " entry " << e;
        }
    }
}

TEST(Merge, SingleAdapterIsBitIdentical) {
    const KnowledgeAdapter k = random_knowledge(1);
    const auto merged = merge(std::vector<KnowledgeAdapter>{k}, uniform_weights(1));
    for (std::size_t s = 0; s < k.layers.size(); ++s) EXPECT_EQ(merged.sites[s].delta, delta_w(k.layers[s]));
}

TEST(Merge, CopiesAreAFixedPoint) {
    const KnowledgeAdapter k = random_knowledge(2);
    const auto merged = merge(std::vector<KnowledgeAdapter>(5, k), uniform_weights(5));
    for (std::size_t s = 0; s < k.layers.size(); ++s) {
        EXPECT_LE(linalg::max_abs_diff(merged.sites[s].delta, delta_w(k.layers[s])), 1e-12);
    }
}

TEST(Merge, MatchesElementwiseOracle) {
    const std::vector<KnowledgeAdapter> ks = {random_knowledge(3), random_knowledge(4), random_knowledge(5)};
    const std::vector<double> alpha = {0.5, 0.3, 0.2};
    const auto merged = merge(ks, MergeWeights{alpha});
    for (std::size_t s = 0; s < ks[0].layers.size(); ++s) {
        const Matrix& got = merged.sites[s].delta;
        for (std::size_t i = 0; i < got.rows(); ++i) {
            for (std::size_t j = 0; j < got.cols(); ++j) {
                double want = 0.0;
                for (std::size_t m = 0; m < ks.size(); ++m) {
                    double dij = 0.0;
                    const auto& l = ks[m].layers[s];
                    for (std::size_t r = 0; r < l.a.rows(); ++r) dij += l.b(i, r) * l.a(r, j);
                    want += alpha[m] * dij;
                }
                EXPECT_NEAR(got(i, j), want, 1e-12);
            }
        }
    }
}

TEST(Merge, Errors) {
    EXPECT_THROW(merge(std::vector<KnowledgeAdapter>{}, MergeWeights{}), EmptyMergeError);
    const KnowledgeAdapter k = random_knowledge(1);
    EXPECT_THROW(merge(std::vector<KnowledgeAdapter>{k, k}, uniform_weights(3)), StructuralError);
    EXPECT_THROW(merge(std::vector<KnowledgeAdapter>{k, k}, MergeWeights{{0.7, 0.7}}), ArgumentError);
    KnowledgeAdapter other = random_knowledge(2);
    other.layers[1].site = SiteId{1, SiteKind::mlp_down};
    EXPECT_THROW(merge(std::vector<KnowledgeAdapter>{k, other}, uniform_weights(2)), StructuralError);
    KnowledgeAdapter hard = random_knowledge(3);
    hard.variant = Variant::hard;
    EXPECT_THROW(merge(std::vector<KnowledgeAdapter>{k, hard}, uniform_weights(2)), StructuralError);
}

TEST(Merge, WeightedSumIsLinearInWeights) {
    const KnowledgeAdapter k1 = random_knowledge(6);
    const KnowledgeAdapter k2 = random_knowledge(7);
    const std::vector<const KnowledgeAdapter*> ks = {&k1, &k2};
    const auto ma = weighted_sum(ks, {0.3, -1.2});
    const auto mb = weighted_sum(ks, {0.9, 0.4});
    const auto mab = weighted_sum(ks, {1.2, -0.8});
    for (std::size_t s = 0; s < k1.layers.size(); ++s) {
        EXPECT_LE(linalg::max_abs_diff(ma.sites[s].delta + mb.sites[s].delta, mab.sites[s].delta), 1e-12);
    }
}

TEST(Weights, Uniform) {
    EXPECT_EQ(uniform_weights(1).alphas, std::vector<double>{1.0});
    EXPECT_EQ(uniform_weights(4).alphas, (std::vector<double>{0.25, 0.25, 0.25, 0.25}));
    const auto w3 = uniform_weights(3).alphas;
    EXPECT_NEAR(w3[0] + w3[1] + w3[2], 1.0, 1e-12);
    EXPECT_THROW(uniform_weights(0), EmptyMergeError);
}

TEST(Weights, Score) {
    EXPECT_EQ(score_weights({2.0, 2.0}).alphas, (std::vector<double>{0.5, 0.5}));
    EXPECT_EQ(score_weights({3.0, 1.0}).alphas, (std::vector<double>{0.75, 0.25}));
    EXPECT_EQ(score_weights({0.0, 0.0}).alphas, (std::vector<double>{0.5, 0.5}));
    EXPECT_EQ(score_weights({-1.0, 3.0}).alphas, (std::vector<double>{0.0, 1.0}));
}

TEST(Flatten, LengthsAndOrder) {
    KnowledgeAdapter zero = random_knowledge(1);
    for (auto& l : zero.layers) {
        l.a.fill(0.0);
        l.b.fill(0.0);
    }
    const auto z = flatten(zero, FlattenKind::all);
    EXPECT_EQ(z.size(), 3u * 6 + 10 * 3 + 3 * 10 + 6 * 3);
    for (double x : z) EXPECT_EQ(x, 0.0);
    const KnowledgeAdapter k = random_knowledge(2);
    EXPECT_EQ(flatten(k, FlattenKind::all).size(), z.size());
    const auto a_side = flatten(k, FlattenKind::a_side);
    EXPECT_EQ(a_side.size(), 3u * 6 + 3 * 10);
    EXPECT_EQ(a_side[0], k.layers[0].a(0, 0));
    EXPECT_EQ(a_side[18], k.layers[1].a(0, 0));
    EXPECT_EQ(flatten(k, FlattenKind::b_side)[0], k.layers[0].b(0, 0));
}

TEST(Flatten, RoundTripIsExact) {
    const KnowledgeAdapter k = random_knowledge(3);
    KnowledgeAdapter copy = random_knowledge(4);
    unflatten(flatten(k, FlattenKind::all), copy);
    for (std::size_t s = 0; s < k.layers.size(); ++s) {
        EXPECT_EQ(copy.layers[s].a, k.layers[s].a);
        EXPECT_EQ(copy.layers[s].b, k.layers[s].b);
    }
    EXPECT_THROW(unflatten(std::vector<double>(3), copy), ShapeError);
}

TEST(Flatten, SelfCosineIsOne) {
    const auto v = flatten(random_knowledge(5), FlattenKind::all);
    EXPECT_NEAR(linalg::cosine(v, v), 1.0, 1e-15);
}

TEST(ContentHash, ChangesWithParameters) {
    KnowledgeAdapter k = random_knowledge(1);
    const auto h = k.content_hash();
    k.layers[1].b(0, 0) += 1e-3;
    EXPECT_NE(h, k.content_hash());
}

TEST(Enums, ParseRoundTrip) {
    for (auto v : {Variant::entangled, Variant::soft, Variant::hard}) EXPECT_EQ(parse_variant(to_string(v)), v);
    for (auto t : {TaskType::qa, TaskType::fact_check, TaskType::slot_fill}) {
        EXPECT_EQ(parse_task_type(to_string(t)), t);
    }
    for (auto k : {FlattenKind::a_side, FlattenKind::b_side, FlattenKind::all}) {
        EXPECT_EQ(parse_flatten_kind(to_string(k)), k);
    }
    EXPECT_THROW(parse_variant("medium"), ArgumentError);
}

}  // namespace
}  // namespace osd::adapters
