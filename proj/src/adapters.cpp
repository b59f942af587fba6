// Copyright 2026 The OSD Authors
// SPDX-License-Identifier: Apache-2.0

#include "osd/adapters.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "osd/error.hpp"

namespace osd::adapters {

using linalg::matmul;
using linalg::matmul_nt;

std::string SiteId::str() const {
    return "L" + std::to_string(layer) + (kind == SiteKind::mlp_up ? ".mlp_up" : ".mlp_down");
}

SiteId SiteId::parse(std::string_view text) {
    const auto dot = text.find('.');
    if (text.size() < 3 || text[0] != 'L' || dot == std::string_view::npos) {
        throw FormatError("bad site id '" + std::string(text) + "'");
    }
    SiteId id;
    try {
        id.layer = std::stoi(std::string(text.substr(1, dot - 1)));
    } catch (const std::exception&) {
        throw FormatError("bad site id '" + std::string(text) + "'");
    }
    const auto kind = text.substr(dot + 1);
    if (kind == "mlp_up") {
        id.kind = SiteKind::mlp_up;
    } else if (kind == "mlp_down") {
        id.kind = SiteKind::mlp_down;
    } else {
        throw FormatError("bad site kind '" + std::string(kind) + "'");
    }
    return id;
}

std::string to_string(TaskType t) {
    switch (t) {
        case TaskType::qa: return "qa";
        case TaskType::fact_check: return "fact_check";
        case TaskType::slot_fill: return "slot_fill";
    }
    return "?";
}

std::string to_string(Variant v) {
    switch (v) {
        case Variant::entangled: return "entangled";
        case Variant::soft: return "soft";
        case Variant::hard: return "hard";
    }
    return "?";
}

std::string to_string(FlattenKind k) {
    switch (k) {
        case FlattenKind::a_side: return "a_side";
        case FlattenKind::b_side: return "b_side";
        case FlattenKind::all: return "all";
    }
    return "?";
}

TaskType parse_task_type(std::string_view text) {
    if (text == "qa") return TaskType::qa;
    if (text == "fact_check") return TaskType::fact_check;
    if (text == "slot_fill") return TaskType::slot_fill;
    throw ArgumentError("unknown task type '" + std::string(text) + "'");
}

Variant parse_variant(std::string_view text) {
    if (text == "entangled") return Variant::entangled;
    if (text == "soft") return Variant::soft;
    if (text == "hard") return Variant::hard;
    throw ArgumentError("unknown variant '" + std::string(text) + "'");
}

FlattenKind parse_flatten_kind(std::string_view text) {
    if (text == "a_side") return FlattenKind::a_side;
    if (text == "b_side") return FlattenKind::b_side;
    if (text == "all") return FlattenKind::all;
    throw ArgumentError("unknown flatten kind '" + std::string(text) + "'");
}

void LoraLayer::validate() const {
    if (a.rows() != b.cols()) {
        throw ShapeError("LoraLayer " + site.str() + ": rank mismatch a.rows=" + std::to_string(a.rows()) +
                         " b.cols=" + std::to_string(b.cols()));
    }
}

namespace {

std::uint64_t hash_layers(const std::vector<LoraLayer>& layers, std::uint64_t h) {
    for (const auto& l : layers) {
        h = linalg::hash_values(l.a.values(), h);
        h = linalg::hash_values(l.b.values(), h);
    }
    return h;
}

void require_matching_sites(const TaskAdapter& task, const KnowledgeAdapter& know) {
    if (task.layers.size() != know.layers.size()) {
        throw StructuralError("site-set mismatch: task has " + std::to_string(task.layers.size()) +
                              " sites, knowledge adapter '" + know.doc_id + "' has " +
                              std::to_string(know.layers.size()));
    }
    for (std::size_t i = 0; i < task.layers.size(); ++i) {
        if (task.layers[i].site != know.layers[i].site) {
            throw StructuralError("site-set mismatch at position " + std::to_string(i) + ": " +
                                  task.layers[i].site.str() + " vs " + know.layers[i].site.str());
        }
    }
}

}  // namespace

std::uint64_t TaskAdapter::content_hash() const { return hash_layers(layers, 0xcbf29ce484222325ULL); }

std::uint64_t KnowledgeAdapter::content_hash() const {
    std::uint64_t h = hash_layers(layers, 0xcbf29ce484222325ULL);
    for (const auto& m : a_hat) h = linalg::hash_values(m.values(), h);
    return h;
}

void KnowledgeAdapter::sync_hard() {
    if (variant != Variant::hard) return;
    if (a_hat.size() != layers.size() || bases.size() != layers.size()) {
        throw StructuralError("hard adapter '" + doc_id + "' is missing a_hat or bases");
    }
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (!bases[i]) throw StructuralError("hard adapter '" + doc_id + "' has no basis for " + layers[i].site.str());
        layers[i].a = expand_hard(a_hat[i], *bases[i]);
    }
}

Matrix delta_w(const LoraLayer& layer) {
    layer.validate();
    return matmul(layer.b, layer.a);
}

Matrix expand_hard(const Matrix& a_hat, const NullSpaceBasis& basis) {
    if (a_hat.cols() != basis.v_perp.cols()) {
        throw ShapeError("expand_hard: a_hat has " + std::to_string(a_hat.cols()) + " columns, null space has dim " +
                         std::to_string(basis.v_perp.cols()));
    }
    return matmul_nt(a_hat, basis.v_perp);
}

double overlap_penalty(const TaskAdapter& task, const KnowledgeAdapter& know) {
    require_matching_sites(task, know);
    double total = 0.0;
    for (std::size_t i = 0; i < task.layers.size(); ++i) {
        total += linalg::cross_overlap(task.layers[i].a, know.layers[i].a);
    }
    return total;
}

double overlap_penalty_trace(const TaskAdapter& task, const KnowledgeAdapter& know) {
    require_matching_sites(task, know);
    double total = 0.0;
    for (std::size_t i = 0; i < task.layers.size(); ++i) {
        total += linalg::cross_overlap_trace(task.layers[i].a, know.layers[i].a);
    }
    return total;
}

std::vector<Matrix> overlap_penalty_grad(const TaskAdapter& task, const KnowledgeAdapter& know) {
    if (know.variant == Variant::hard) {
        throw UnsupportedVariantError("overlap_penalty_grad: hard adapter '" + know.doc_id +
                                      "' is orthogonal by construction and carries no penalty");
    }
    require_matching_sites(task, know);
    std::vector<Matrix> grads;
    grads.reserve(task.layers.size());
    for (std::size_t i = 0; i < task.layers.size(); ++i) {
        const Matrix& a_t = task.layers[i].a;
        const Matrix& a_k = know.layers[i].a;
        // 2 (A_K A_T^T) A_T
        Matrix g = matmul(matmul_nt(a_k, a_t), a_t);
        g *= 2.0;
        grads.push_back(std::move(g));
    }
    return grads;
}

void validate_weights(const MergeWeights& w) {
    double sum = 0.0;
    for (double a : w.alphas) {
        if (!(a >= 0.0) || !std::isfinite(a)) throw ArgumentError("merge weights must be finite and non-negative");
        sum += a;
    }
    if (std::abs(sum - 1.0) > 1e-12) {
        throw ArgumentError("merge weights must sum to 1 (got " + std::to_string(sum) + ")");
    }
}

MergedKnowledge weighted_sum(const std::vector<const KnowledgeAdapter*>& adapters, const std::vector<double>& w) {
    if (adapters.empty()) throw EmptyMergeError("merge: no adapters");
    if (w.size() != adapters.size()) {
        throw StructuralError("merge: " + std::to_string(w.size()) + " weights for " +
                              std::to_string(adapters.size()) + " adapters");
    }
    const KnowledgeAdapter& first = *adapters.front();
    for (const auto* ad : adapters) {
        if (ad->variant != first.variant) {
            throw StructuralError("merge: adapters mix variants " + to_string(first.variant) + " and " +
                                  to_string(ad->variant));
        }
        if (ad->layers.size() != first.layers.size()) throw StructuralError("merge: adapters differ in site count");
        for (std::size_t s = 0; s < first.layers.size(); ++s) {
            if (ad->layers[s].site != first.layers[s].site) throw StructuralError("merge: adapters differ in site set");
        }
    }
    MergedKnowledge out;
    out.sites.reserve(first.layers.size());
    for (std::size_t s = 0; s < first.layers.size(); ++s) {
        Matrix acc;
        for (std::size_t i = 0; i < adapters.size(); ++i) {
            Matrix d = delta_w(adapters[i]->layers[s]);
            if (i == 0) {
                d *= w[0];
                acc = std::move(d);
            } else {
                auto dst = acc.values();
                auto src = d.values();
                for (std::size_t e = 0; e < dst.size(); ++e) dst[e] += w[i] * src[e];
            }
        }
        out.sites.push_back(SiteDelta{first.layers[s].site, std::move(acc)});
    }
    return out;
}

MergedKnowledge merge(const std::vector<const KnowledgeAdapter*>& adapters, const MergeWeights& weights) {
    if (adapters.empty()) throw EmptyMergeError("merge: no adapters");
    if (weights.alphas.size() != adapters.size()) {
        throw StructuralError("merge: " + std::to_string(weights.alphas.size()) + " weights for " +
                              std::to_string(adapters.size()) + " adapters");
    }
    validate_weights(weights);
    if (adapters.size() == 1 && weights.alphas[0] == 1.0) {
        MergedKnowledge out;
        for (const auto& l : adapters[0]->layers) out.sites.push_back(SiteDelta{l.site, delta_w(l)});
        return out;
    }
    return weighted_sum(adapters, weights.alphas);
}

MergedKnowledge merge(const std::vector<KnowledgeAdapter>& adapters, const MergeWeights& weights) {
    std::vector<const KnowledgeAdapter*> ptrs;
    ptrs.reserve(adapters.size());
    for (const auto& a : adapters) ptrs.push_back(&a);
    return merge(ptrs, weights);
}

MergeWeights uniform_weights(std::size_t k) {
    if (k == 0) throw EmptyMergeError("uniform_weights: k = 0");
    return MergeWeights{std::vector<double>(k, 1.0 / static_cast<double>(k))};
}

MergeWeights score_weights(const std::vector<double>& scores) {
    if (scores.empty()) throw EmptyMergeError("score_weights: no scores");
    double total = 0.0;
    for (double s : scores) {
        if (!std::isfinite(s)) throw ArgumentError("score_weights: non-finite score");
        total += std::max(s, 0.0);
    }
    if (total <= 0.0) return uniform_weights(scores.size());
    MergeWeights w;
    w.alphas.reserve(scores.size());
    for (double s : scores) w.alphas.push_back(std::max(s, 0.0) / total);
    return w;
}

std::vector<double> flatten(const KnowledgeAdapter& adapter, FlattenKind kind) {
    std::vector<double> out;
    for (const auto& l : adapter.layers) {
        if (kind != FlattenKind::b_side) out.insert(out.end(), l.a.values().begin(), l.a.values().end());
        if (kind != FlattenKind::a_side) out.insert(out.end(), l.b.values().begin(), l.b.values().end());
    }
    return out;
}

void unflatten(std::span<const double> values, KnowledgeAdapter& adapter) {
    std::size_t expected = 0;
    for (const auto& l : adapter.layers) expected += l.a.size() + l.b.size();
    if (values.size() != expected) {
        throw ShapeError("unflatten: " + std::to_string(values.size()) + " values for " + std::to_string(expected) +
                         " parameters");
    }
    std::size_t pos = 0;
    for (auto& l : adapter.layers) {
        std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(pos), l.a.size(), l.a.values().begin());
        pos += l.a.size();
        std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(pos), l.b.size(), l.b.values().begin());
        pos += l.b.size();
    }
    if (adapter.variant == Variant::hard && adapter.bases.size() == adapter.layers.size()) {
        // Recover the free parameters; exact when a already lies in span(V_perp).
        for (std::size_t i = 0; i < adapter.layers.size(); ++i) {
            if (adapter.bases[i]) adapter.a_hat[i] = matmul(adapter.layers[i].a, adapter.bases[i]->v_perp);
        }
    }
}

double max_cross_product(const TaskAdapter& task, const KnowledgeAdapter& know) {
    require_matching_sites(task, know);
    double worst = 0.0;
    for (std::size_t i = 0; i < task.layers.size(); ++i) {
        worst = std::max(worst, linalg::max_abs(matmul_nt(know.layers[i].a, task.layers[i].a)));
    }
    return worst;
}

}  // namespace osd::adapters
