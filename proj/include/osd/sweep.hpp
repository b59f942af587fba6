// Copyright 2026 The OSD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "osd/adapters.hpp"
#include "osd/benchmark.hpp"
#include "osd/model.hpp"
#include "osd/retrieval.hpp"

namespace osd::benchmark {

enum class Method { no_adapter, entangled, soft, hard };
enum class WeightMode { uniform, score };
enum class RetrieverKind { bm25, oracle };

std::string to_string(Method m);
std::string to_string(WeightMode m);
std::string to_string(RetrieverKind r);
Method parse_method(std::string_view text);
WeightMode parse_weight_mode(std::string_view text);
RetrieverKind parse_retriever(std::string_view text);

/// Knowledge variant loaded by a method; no_adapter has none.
std::optional<adapters::Variant> method_variant(Method m);

using AdapterStore = std::map<std::string, adapters::KnowledgeAdapter>;

/// Adapters trained under one seed. Pointers are borrowed.
struct SeedAdapters {
    std::uint64_t seed = 0;
    const adapters::TaskAdapter* task = nullptr;
    std::map<adapters::Variant, const AdapterStore*> knowledge;
};

struct SweepOptions {
    std::vector<std::size_t> k_list{1, 3, 5, 7, 10};
    std::vector<Method> methods{Method::no_adapter, Method::entangled, Method::soft, Method::hard};
    WeightMode weight_mode = WeightMode::uniform;
    RetrieverKind retriever = RetrieverKind::bm25;
    std::size_t n_eval = 300;
    int max_new_tokens = 4;
    int jobs = 1;
};

struct SweepCell {
    Method method = Method::no_adapter;
    std::size_t k = 0;
    std::uint64_t seed = 0;
    std::optional<double> value;  // empty when the cell failed
    std::string error;
};

struct MethodTrend {
    Method method = Method::no_adapter;
    std::vector<std::optional<double>> seed_mean;  // one per K
    std::optional<double> best;
    std::optional<std::size_t> best_k;
    std::optional<double> last;
    std::optional<double> degradation;  // best - last
};

struct DepthSweepReport {
    TaskType task_type = TaskType::qa;
    std::string metric;
    std::vector<std::size_t> k_list;
    std::vector<std::uint64_t> seeds;
    std::vector<Method> methods;
    WeightMode weight_mode = WeightMode::uniform;
    RetrieverKind retriever = RetrieverKind::bm25;
    std::size_t n_instances = 0;
    std::vector<SweepCell> cells;
    std::vector<MethodTrend> trends;
    std::optional<bool> no_adapter_flat;
    std::optional<bool> soft_degrades_less;
    std::vector<std::string> warnings;

    const SweepCell* cell(Method m, std::size_t k, std::uint64_t seed) const;
    std::size_t failed_cells() const;
};

/// Retrieval order used for one instance: BM25 top-k, or the gold sources
/// padded with BM25 results for the oracle retriever.
std::vector<retrieval::RetrievalResult> retrieve_for(const retrieval::InvertedIndex& index, const TaskInstance& inst,
                                                     std::size_t k, RetrieverKind retriever);

/// Scores the first n_eval instances for every (method, K, seed) cell.
DepthSweepReport run_depth_sweep(const model::BaseWeights& base, const Vocab& vocab,
                                 const retrieval::InvertedIndex& index, const std::vector<TaskInstance>& instances,
                                 const std::vector<SeedAdapters>& seeds, const SweepOptions& options);

std::string sweep_csv(const DepthSweepReport& report);
std::string sweep_json(const DepthSweepReport& report);

}  // namespace osd::benchmark
