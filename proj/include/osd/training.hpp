// Copyright 2026 The OSD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "osd/adapters.hpp"
#include "osd/model.hpp"

namespace osd::training {

using adapters::KnowledgeAdapter;
using adapters::TaskAdapter;
using adapters::TaskType;
using adapters::Variant;
using linalg::Matrix;
using linalg::NullSpaceBasis;

enum class OptimizerKind { sgd, adam };

/// Library defaults follow the reference hyperparameters (knowledge lr 3e-4,
/// one epoch, lambda 0.1, tau 1e-5). Desk-scale runs override lr/epochs.
struct TrainConfig {
    double learning_rate = 3e-4;
    int epochs = 1;
    int batch_size = 8;
    double lambda = 0.1;  // soft variant only
    Variant variant = Variant::soft;
    double tau = 1e-5;  // hard variant only
    std::uint64_t seed = 0;
    OptimizerKind optimizer = OptimizerKind::adam;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t rank = 4;
    double init_std = 0.02;

    static TrainConfig task_defaults();
};

struct StepRecord {
    double total = 0.0;
    double ce = 0.0;
    double ortho = 0.0;
};

struct TrainReport {
    std::vector<StepRecord> steps;
    double final_ce = 0.0;
    std::optional<double> final_ortho;
    double wall_seconds = 0.0;
    std::size_t step_count = 0;
};

/// Examples for one task type, not tied to a single document.
struct TaskCorpus {
    TaskType task_type = TaskType::qa;
    std::vector<model::Sequence> examples;
};

/// Examples derived from one document.
struct DocumentCorpus {
    std::string doc_id;
    std::vector<model::Sequence> examples;
};

using SiteBases = std::vector<std::shared_ptr<const NullSpaceBasis>>;

struct ParamSlot {
    std::string name;
    Matrix* value = nullptr;
    const Matrix* grad = nullptr;
};

struct OptimizerState {
    std::vector<Matrix> m;
    std::vector<Matrix> v;
    long step = 0;
};

/// One SGD or Adam (bias-corrected) update. Throws NumericError naming the
/// offending parameter before touching anything if a gradient is non-finite.
void optimizer_step(std::span<const ParamSlot> params, OptimizerState& state, const TrainConfig& config);

/// Example order for each step of one epoch: a seeded shuffle cut into
/// batch_size chunks.
std::vector<std::vector<std::size_t>> epoch_schedule(std::size_t n_examples, int batch_size, std::uint64_t seed,
                                                     int epoch);

/// Fresh task adapter: A ~ N(0, init_std), B = 0.
TaskAdapter init_task_adapter(const model::ModelConfig& cfg, TaskType type, const TrainConfig& config);

/// Fresh knowledge adapter. Hard adapters draw a_hat and need `bases`.
KnowledgeAdapter init_knowledge_adapter(const model::ModelConfig& cfg, const std::string& doc_id,
                                        const TrainConfig& config, const SiteBases* bases);

std::pair<TaskAdapter, TrainReport> train_task(const TaskCorpus& corpus, const model::BaseWeights& base,
                                               const TrainConfig& config);

/// One null-space basis per adapted site of the task adapter.
SiteBases precompute_bases(const TaskAdapter& task, double tau);

/// Trains a knowledge adapter on top of the frozen task adapter. Entangled
/// ignores `task`; soft adds lambda * L_ortho; hard trains a_hat in the null
/// space (bases computed on demand when not supplied).
std::pair<KnowledgeAdapter, TrainReport> train_knowledge(const DocumentCorpus& doc, const TaskAdapter* task,
                                                         const model::BaseWeights& base, const TrainConfig& config,
                                                         const SiteBases* bases = nullptr);

/// Deterministic per-document seed derived from a run seed.
std::uint64_t derive_seed(std::uint64_t seed, const std::string& key);

}  // namespace osd::training
