// Copyright 2026 The OSD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "osd/adapters.hpp"
#include "osd/benchmark.hpp"

namespace osd::analysis {

using adapters::FlattenKind;
using adapters::KnowledgeAdapter;
using DocPair = std::pair<std::string, std::string>;  // stored with first < second

struct PairSet {
    std::vector<DocPair> relevant;
    std::vector<DocPair> irrelevant;
};

/// Written into every report header.
extern const char* const kRelevanceDefinition;

/// Relevant: documents co-listed as sources of one instance. Irrelevant:
/// seeded random pairs never co-listed, drawn from all source documents.
PairSet collect_pairs(const std::vector<benchmark::TaskInstance>& instances, std::size_t n_irrelevant,
                      std::uint64_t seed);

constexpr int kBins = 40;  // width 0.05 over [-1, 1]

std::array<std::size_t, kBins> histogram(const std::vector<double>& values);

struct ClassStats {
    std::vector<double> cosines;  // one per pair, in PairSet order
    double mean = 0.0;
    std::array<std::size_t, kBins> bins{};
};

struct KindStats {
    FlattenKind kind = FlattenKind::a_side;
    ClassStats relevant;
    ClassStats irrelevant;
};

struct VariantSimilarity {
    std::string variant;
    std::vector<KindStats> kinds;
    std::optional<bool> trend_ok;
    std::vector<std::string> warnings;
};

struct SimilarityReport {
    std::string relevance_definition = kRelevanceDefinition;
    std::size_t n_relevant = 0;
    std::size_t n_irrelevant = 0;
    std::vector<VariantSimilarity> variants;
};

using AdapterMap = std::map<std::string, KnowledgeAdapter>;

/// Cosine between flattened adapters per pair and kind. Throws LookupError
/// naming the first paired doc without an adapter.
VariantSimilarity similarity_report(const AdapterMap& adapters, const PairSet& pairs,
                                    const std::vector<FlattenKind>& kinds, int jobs = 1);

/// Soft: mean(relevant) > mean(irrelevant) on every kind. Hard: both class
/// means within +-tolerance of zero. Failures become warnings.
void check_trend(VariantSimilarity& v, adapters::Variant variant, double hard_tolerance = 0.15);

std::string histogram_csv(const SimilarityReport& report);
std::string summary_json(const SimilarityReport& report);

}  // namespace osd::analysis
