// Copyright 2026 The OSD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "osd/adapters.hpp"
#include "osd/linalg.hpp"

namespace osd::model {

using adapters::KnowledgeAdapter;
using adapters::LoraLayer;
using adapters::MergedKnowledge;
using adapters::SiteId;
using adapters::TaskAdapter;
using linalg::Matrix;

struct ModelConfig {
    int vocab_size = 0;
    int d_model = 64;
    int n_layers = 2;
    int n_heads = 4;
    int d_ff = 128;
    int max_seq = 128;
    std::uint64_t seed = 0;
    double init_std = 0.02;
    double head_std = 0.5;  // output head only

    void validate() const;
};

struct BlockWeights {
    std::vector<double> ln1_gain, ln1_bias;
    Matrix wq, wk, wv, wo;  // d_model x d_model
    std::vector<double> ln2_gain, ln2_bias;
    Matrix mlp_up;    // d_ff x d_model
    Matrix mlp_down;  // d_model x d_ff
};

/// Frozen base parameters. Pre-norm decoder blocks, learned positions,
/// GELU MLP, untied output head, no biases on projections.
struct BaseWeights {
    ModelConfig config;
    Matrix token_embedding;     // vocab x d_model
    Matrix position_embedding;  // max_seq x d_model
    std::vector<BlockWeights> blocks;
    std::vector<double> final_gain, final_bias;
    Matrix head;  // vocab x d_model

    std::uint64_t content_hash() const;
    const Matrix& site_weight(const SiteId& site) const;
    Matrix& site_weight(const SiteId& site);
};

/// Every adapted site: {mlp_up, mlp_down} for each layer, in SiteId order.
std::vector<SiteId> adapted_sites(const ModelConfig& config);

/// Input and output width of a site's weight matrix.
struct SiteShape {
    std::size_t d_in = 0;
    std::size_t d_out = 0;
};
SiteShape site_shape(const ModelConfig& config, const SiteId& site);

struct Sequence {
    std::vector<int> tokens;   // model input
    std::vector<int> targets;  // next-token ids, same length
    std::vector<bool> loss_mask;
};

struct Batch {
    std::vector<Sequence> rows;
};

BaseWeights init_base(const ModelConfig& config);

/// Logits (T x vocab) for every sequence in the batch. At each adapted site the
/// effective weight is W0 + Delta W_T + Delta W_K; a null adapter drops its term.
std::vector<Matrix> forward(const BaseWeights& base, const TaskAdapter* task, const MergedKnowledge* merged,
                            const Batch& batch);

/// Mean negative log-likelihood over masked positions.
double loss_ce(const std::vector<Matrix>& logits, const Batch& batch);

/// Gradients of the masked CE loss for one trainable low-rank adapter.
struct LoraGrads {
    std::vector<Matrix> a;  // per site; for hard adapters this is d/d a_hat
    std::vector<Matrix> b;
    double loss = 0.0;
};

/// Knowledge-adapter gradients with `task` loaded and frozen (nullptr = not loaded).
LoraGrads backward_lora(const BaseWeights& base, const TaskAdapter* task, const KnowledgeAdapter& know,
                        const Batch& batch);

/// Gradients for a task adapter trained directly on the base model.
LoraGrads backward_task(const BaseWeights& base, const TaskAdapter& task, const Batch& batch);

/// CE loss with `know` as a live low-rank term (no merge), matching backward_lora.
double loss_with_knowledge(const BaseWeights& base, const TaskAdapter* task, const KnowledgeAdapter& know,
                           const Batch& batch);

/// Argmax decoding. Stops after `eos` is produced (not included) or after
/// max_new_tokens, or when the context reaches max_seq.
std::vector<int> greedy_decode(const BaseWeights& base, const TaskAdapter* task, const MergedKnowledge* merged,
                               const std::vector<int>& prompt, int max_new_tokens, int eos);

}  // namespace osd::model
