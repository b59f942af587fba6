// Copyright 2026 The OSD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "osd/linalg.hpp"

namespace osd::adapters {

using linalg::Matrix;
using linalg::NullSpaceBasis;

enum class SiteKind { mlp_up, mlp_down };

/// Identifies one adapted weight matrix: layer index plus projection kind.
struct SiteId {
    int layer = 0;
    SiteKind kind = SiteKind::mlp_up;

    std::string str() const;
    static SiteId parse(std::string_view text);

    auto operator<=>(const SiteId&) const = default;
};

enum class TaskType { qa, fact_check, slot_fill };
enum class Variant { entangled, soft, hard };
enum class FlattenKind { a_side, b_side, all };

std::string to_string(TaskType t);
std::string to_string(Variant v);
std::string to_string(FlattenKind k);
TaskType parse_task_type(std::string_view text);
Variant parse_variant(std::string_view text);
FlattenKind parse_flatten_kind(std::string_view text);

/// One low-rank update Delta W = b * a, scaling fixed to 1.
struct LoraLayer {
    SiteId site;
    Matrix a;  // r x d_in
    Matrix b;  // d_out x r

    std::size_t rank() const noexcept { return a.rows(); }
    void validate() const;
};

struct TaskAdapter {
    TaskType task_type = TaskType::qa;
    std::size_t rank = 0;
    std::vector<LoraLayer> layers;  // sorted by site

    std::uint64_t content_hash() const;
};

struct KnowledgeAdapter {
    std::string doc_id;
    Variant variant = Variant::entangled;
    std::size_t rank = 0;
    std::vector<LoraLayer> layers;  // sorted by site; for hard, a is the expanded a_hat * v_perp^T

    // Hard variant only, one entry per layer.
    std::vector<Matrix> a_hat;
    std::vector<std::shared_ptr<const NullSpaceBasis>> bases;
    double tau = 0.0;

    std::uint64_t content_hash() const;

    /// Re-derives every layer's a from a_hat and the cached bases.
    void sync_hard();
};

struct MergeWeights {
    std::vector<double> alphas;
};

struct SiteDelta {
    SiteId site;
    Matrix delta;  // d_out x d_in
};

struct MergedKnowledge {
    std::vector<SiteDelta> sites;
};

Matrix delta_w(const LoraLayer& layer);

/// a_hat * v_perp^T.
Matrix expand_hard(const Matrix& a_hat, const NullSpaceBasis& basis);

/// Sum over sites of ||A_T A_K^T||_F^2.
double overlap_penalty(const TaskAdapter& task, const KnowledgeAdapter& know);

/// The same sum evaluated through the trace identity, one term per site.
double overlap_penalty_trace(const TaskAdapter& task, const KnowledgeAdapter& know);

/// Per-site gradient of overlap_penalty w.r.t. the knowledge down-projection:
/// 2 * A_K * (A_T^T A_T). Not defined for the hard variant.
std::vector<Matrix> overlap_penalty_grad(const TaskAdapter& task, const KnowledgeAdapter& know);

MergedKnowledge merge(const std::vector<const KnowledgeAdapter*>& adapters, const MergeWeights& weights);
MergedKnowledge merge(const std::vector<KnowledgeAdapter>& adapters, const MergeWeights& weights);

/// Unnormalised sum_i w_i * Delta W_i; merge() is this plus the simplex check.
MergedKnowledge weighted_sum(const std::vector<const KnowledgeAdapter*>& adapters, const std::vector<double>& w);

MergeWeights uniform_weights(std::size_t k);

/// Scores clamped at zero and normalised; all non-positive falls back to uniform.
MergeWeights score_weights(const std::vector<double>& scores);

void validate_weights(const MergeWeights& w);

std::vector<double> flatten(const KnowledgeAdapter& adapter, FlattenKind kind);

/// Inverse of flatten(..., all) onto an adapter with the same structure.
void unflatten(std::span<const double> values, KnowledgeAdapter& adapter);

/// Largest |A_K A_T^T| over all sites.
double max_cross_product(const TaskAdapter& task, const KnowledgeAdapter& know);

}  // namespace osd::adapters
