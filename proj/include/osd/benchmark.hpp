// Copyright 2026 The OSD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "osd/adapters.hpp"
#include "osd/model.hpp"
#include "osd/retrieval.hpp"
#include "osd/training.hpp"

namespace osd::benchmark {

using adapters::TaskType;

struct Fact {
    std::size_t subject = 0;
    std::size_t relation = 0;
    std::size_t object = 0;
};

struct WorldDoc {
    std::string doc_id;
    std::vector<std::size_t> facts;  // indices into SyntheticWorld::facts
};

/// Closed world of (subject, relation) -> object facts. Each pair has one
/// object and each fact lives in exactly one document.
struct SyntheticWorld {
    std::uint64_t seed = 0;
    std::vector<std::string> entities;
    std::vector<std::string> relations;
    std::vector<Fact> facts;
    std::vector<WorldDoc> docs;

    std::size_t doc_of_fact(std::size_t fact) const;
};

struct GeneratedWorld {
    SyntheticWorld world;
    std::vector<retrieval::Document> corpus;
};

struct TaskInstance {
    TaskType task_type = TaskType::qa;
    std::string input;
    std::string gold;
    std::vector<std::string> source_doc_ids;
};

/// Maximum number of relations the fixed template vocabulary supports.
std::size_t max_relations();

/// Documents carry 3-6 facts each, rendered with fixed sentence templates.
GeneratedWorld gen_world(std::uint64_t seed, std::size_t n_entities, std::size_t n_relations, std::size_t n_docs);

/// Renders the corpus for an already generated world.
std::vector<retrieval::Document> render_corpus(const SyntheticWorld& world);

/// per_doc evaluation instances per document. For qa, every
/// `multi_hop_every`-th document's last instance chains two facts from two
/// documents when such a bridge exists (0 disables).
std::vector<TaskInstance> gen_instances(const SyntheticWorld& world, TaskType type, std::size_t per_doc,
                                        std::size_t multi_hop_every = 4);

/// One instance per document on a seeded random fact: the task-level corpus.
std::vector<TaskInstance> gen_task_corpus(const SyntheticWorld& world, TaskType type, std::uint64_t seed);

/// Every fact of one document in task format (fact_check: one true and one
/// corrupted claim per fact).
std::vector<TaskInstance> gen_doc_training(const SyntheticWorld& world, std::size_t doc, TaskType type,
                                           std::uint64_t seed);

std::uint64_t corpus_hash(const std::vector<retrieval::Document>& corpus);

/// Closed word-level vocabulary: specials, template words, relations, entities.
class Vocab {
public:
    static Vocab for_world(const SyntheticWorld& world);

    int size() const noexcept { return static_cast<int>(words_.size()); }
    int id(std::string_view word) const;
    const std::string& word(int id) const;

    /// Whitespace split, lowercased; "[SEP]" maps to the separator token.
    std::vector<int> encode(std::string_view text) const;
    std::string decode(const std::vector<int>& ids) const;

    int pad() const noexcept { return 0; }
    int bos() const noexcept { return 1; }
    int eos() const noexcept { return 2; }
    int sep() const noexcept { return 3; }

private:
    std::vector<std::string> words_;
    std::unordered_map<std::string, int> ids_;
};

/// Task-specific prompt wrapped around the instance input.
std::string render_prompt(const TaskInstance& inst);

/// [bos] + prompt tokens.
std::vector<int> prompt_ids(const Vocab& vocab, const TaskInstance& inst);

/// Teacher-forced training row; the loss mask covers the answer and eos.
model::Sequence make_sequence(const Vocab& vocab, const TaskInstance& inst);

training::TaskCorpus make_task_corpus(const Vocab& vocab, const std::vector<TaskInstance>& instances);
training::DocumentCorpus make_document_corpus(const Vocab& vocab, const std::string& doc_id,
                                              const std::vector<TaskInstance>& instances);

/// Lowercase, strip punctuation and articles, collapse whitespace.
std::string normalize_answer(std::string_view s);
double f1_token(std::string_view prediction, std::string_view gold);
int accuracy(std::string_view prediction, std::string_view gold);

/// F1 for qa/slot_fill, accuracy for fact_check.
double score(TaskType type, std::string_view prediction, std::string_view gold);
std::string metric_name(TaskType type);

void write_instances_jsonl(const std::filesystem::path& path, const std::vector<TaskInstance>& instances);
std::vector<TaskInstance> read_instances_jsonl(const std::filesystem::path& path);

void write_world_json(const std::filesystem::path& path, const SyntheticWorld& world);
SyntheticWorld read_world_json(const std::filesystem::path& path);

}  // namespace osd::benchmark
