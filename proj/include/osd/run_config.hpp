// Copyright 2026 The OSD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "osd/adapters.hpp"
#include "osd/model.hpp"
#include "osd/retrieval.hpp"
#include "osd/sweep.hpp"
#include "osd/training.hpp"

namespace osd::cli {

struct WorldSection {
    std::size_t n_entities = 150;
    std::size_t n_relations = 8;
    std::size_t n_docs = 200;
    std::size_t per_doc = 3;
    std::size_t multi_hop_every = 4;
    adapters::TaskType task_type = adapters::TaskType::qa;
};

struct ModelSection {
    int d_model = 64;
    int n_layers = 2;
    int n_heads = 4;
    int d_ff = 128;
    int max_seq = 128;
    double init_std = 0.1;
    double head_std = 0.5;
};

struct TrainSection {
    double task_lr = 3e-3;
    int task_epochs = 60;
    int task_batch_size = 8;
    std::size_t task_rank = 4;
    double knowledge_lr = 5e-3;
    int knowledge_epochs = 80;
    int knowledge_batch_size = 8;
    std::size_t knowledge_rank = 4;
    double lambda = 0.1;
    double tau = 1e-5;
    double init_std = 0.02;
    std::vector<std::uint64_t> seeds{1, 2, 3};
};

struct RetrievalSection {
    double k1 = 1.2;
    double b = 0.75;
};

struct SweepSection {
    std::vector<std::size_t> k_list{1, 3, 5, 7, 10};
    std::vector<std::string> methods{"no_adapter", "entangled", "soft", "hard"};
    std::string weight_mode = "uniform";
    std::string retriever = "bm25";
    std::size_t n_eval = 300;
    int max_new_tokens = 4;
};

struct AnalysisSection {
    std::size_t n_irrelevant = 200;
    std::vector<std::string> kinds{"a_side", "b_side"};
    std::vector<std::string> variants{"entangled", "soft", "hard"};
    double hard_tolerance = 0.15;
};

/// Every field has a default; JSON input may override any subset. Unknown
/// keys anywhere are rejected with ConfigError.
struct RunConfig {
    std::uint64_t seed = 7;
    std::string out = "runs/default";
    int jobs = 1;
    WorldSection world;
    ModelSection model;
    TrainSection train;
    RetrievalSection retrieval;
    SweepSection sweep;
    AnalysisSection analysis;

    static RunConfig from_json_text(const std::string& text);
    static RunConfig load(const std::filesystem::path& path);
    std::string to_json_text() const;

    /// Throws ConfigError on out-of-range or unparsable values.
    void validate() const;

    model::ModelConfig model_config(int vocab_size) const;
    training::TrainConfig task_train_config(std::uint64_t train_seed) const;
    training::TrainConfig knowledge_train_config(adapters::Variant variant, std::uint64_t train_seed) const;
    retrieval::Bm25Params bm25() const { return {retrieval.k1, retrieval.b}; }
    benchmark::SweepOptions sweep_options() const;
};

}  // namespace osd::cli
