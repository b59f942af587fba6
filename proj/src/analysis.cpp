// Copyright 2026 The OSD Authors
// SPDX-License-Identifier: Apache-2.0

#include "osd/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "osd/error.hpp"
#include "osd/linalg.hpp"
#include "osd/parallel.hpp"
#include "osd/training.hpp"

namespace osd::analysis {

const char* const kRelevanceDefinition =
    "relevant = two documents listed together as sources of one task instance; "
    "irrelevant = seeded random document pairs never listed together";

namespace {

DocPair ordered(const std::string& a, const std::string& b) { return a < b ? DocPair{a, b} : DocPair{b, a}; }

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

std::string bin_edge(int b) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.2f", -1.0 + 0.05 * b);
    return buf;
}

}  // namespace

PairSet collect_pairs(const std::vector<benchmark::TaskInstance>& instances, std::size_t n_irrelevant,
                      std::uint64_t seed) {
    std::set<DocPair> relevant;
    std::set<std::string> universe;
    PairSet out;
    for (const auto& inst : instances) {
        const auto& src = inst.source_doc_ids;
        universe.insert(src.begin(), src.end());
        for (std::size_t i = 0; i < src.size(); ++i) {
            for (std::size_t j = i + 1; j < src.size(); ++j) {
                if (src[i] == src[j]) continue;
                if (relevant.insert(ordered(src[i], src[j])).second) out.relevant.push_back(ordered(src[i], src[j]));
            }
        }
    }
    if (out.relevant.empty()) {
        throw EmptyRelevantError(
            "collect_pairs: no instance lists two source documents; generate qa instances with multi-hop "
            "questions enabled");
    }
    const std::vector<std::string> docs(universe.begin(), universe.end());
    std::vector<DocPair> candidates;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        for (std::size_t j = i + 1; j < docs.size(); ++j) {
            DocPair p{docs[i], docs[j]};
            if (!relevant.count(p)) candidates.push_back(std::move(p));
        }
    }
    std::mt19937_64 rng(training::derive_seed(seed, "irrelevant-pairs"));
    const std::size_t take = std::min(n_irrelevant, candidates.size());
    for (std::size_t i = 0; i < take; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, candidates.size() - 1);
        std::swap(candidates[i], candidates[pick(rng)]);
        out.irrelevant.push_back(candidates[i]);
    }
    return out;
}

std::array<std::size_t, kBins> histogram(const std::vector<double>& values) {
    std::array<std::size_t, kBins> bins{};
    for (double v : values) {
        if (!(v >= -1.0 && v <= 1.0)) throw ArgumentError("histogram: value outside [-1, 1]");
        const int b = std::clamp(static_cast<int>(std::floor((v + 1.0) * 20.0)), 0, kBins - 1);
        ++bins[static_cast<std::size_t>(b)];
    }
    return bins;
}

VariantSimilarity similarity_report(const AdapterMap& adapters, const PairSet& pairs,
                                    const std::vector<FlattenKind>& kinds, int jobs) {
    VariantSimilarity out;
    std::set<std::string> needed;
    for (const auto* list : {&pairs.relevant, &pairs.irrelevant}) {
        for (const auto& [a, b] : *list) {
            for (const auto* id : {&a, &b}) {
                if (!adapters.count(*id)) throw LookupError("similarity_report: no adapter for document '" + *id + "'");
                needed.insert(*id);
            }
        }
    }
    if (!adapters.empty()) out.variant = adapters::to_string(adapters.begin()->second.variant);

    for (FlattenKind kind : kinds) {
        std::map<std::string, std::vector<double>> flat;
        for (const auto& id : needed) flat[id] = adapters::flatten(adapters.at(id), kind);
        auto score = [&](const std::vector<DocPair>& list, ClassStats& stats) {
            stats.cosines.assign(list.size(), 0.0);
            parallel_for(list.size(), jobs, [&](std::size_t i) {
                stats.cosines[i] = linalg::cosine(flat.at(list[i].first), flat.at(list[i].second));
            });
            stats.mean = mean_of(stats.cosines);
            stats.bins = histogram(stats.cosines);
        };
        KindStats ks;
        ks.kind = kind;
        score(pairs.relevant, ks.relevant);
        score(pairs.irrelevant, ks.irrelevant);
        out.kinds.push_back(std::move(ks));
    }
    return out;
}

void check_trend(VariantSimilarity& v, adapters::Variant variant, double hard_tolerance) {
    if (variant == adapters::Variant::entangled) return;
    bool ok = true;
    for (const auto& k : v.kinds) {
        const std::string kind = adapters::to_string(k.kind);
        if (variant == adapters::Variant::soft && !(k.relevant.mean > k.irrelevant.mean)) {
            ok = false;
            v.warnings.push_back("trend: " + kind + " relevant mean does not exceed irrelevant mean");
        }
        if (variant == adapters::Variant::hard &&
            !(std::abs(k.relevant.mean) <= hard_tolerance && std::abs(k.irrelevant.mean) <= hard_tolerance)) {
            ok = false;
            v.warnings.push_back("trend: " + kind + " class means are not both near zero");
        }
    }
    v.trend_ok = ok;
}

std::string histogram_csv(const SimilarityReport& report) {
    std::ostringstream out;
    out << "variant,kind,class,bin_low,bin_high,count\n";
    for (const auto& v : report.variants) {
        for (const auto& k : v.kinds) {
            for (const auto& [cls, stats] : {std::pair{"relevant", &k.relevant}, std::pair{"irrelevant", &k.irrelevant}}) {
                for (int b = 0; b < kBins; ++b) {
                    out << v.variant << ',' << adapters::to_string(k.kind) << ',' << cls << ',' << bin_edge(b) << ','
                        << bin_edge(b + 1) << ',' << stats->bins[static_cast<std::size_t>(b)] << '\n';
                }
            }
        }
    }
    return out.str();
}

std::string summary_json(const SimilarityReport& report) {
    using nlohmann::json;
    json variants = json::object();
    for (const auto& v : report.variants) {
        json kinds = json::object();
        for (const auto& k : v.kinds) {
            kinds[adapters::to_string(k.kind)] = {{"relevant_mean", k.relevant.mean},
                                                  {"irrelevant_mean", k.irrelevant.mean},
                                                  {"relevant_count", k.relevant.cosines.size()},
                                                  {"irrelevant_count", k.irrelevant.cosines.size()}};
        }
        variants[v.variant] = {{"kinds", kinds},
                               {"trend_ok", v.trend_ok ? json(*v.trend_ok) : json(nullptr)},
                               {"warnings", v.warnings}};
    }
    const json j{{"relevance_definition", report.relevance_definition},
                 {"bin_width", 0.05},
                 {"n_relevant", report.n_relevant},
                 {"n_irrelevant", report.n_irrelevant},
                 {"variants", variants}};
    return j.dump(2) + "\n";
}

}  // namespace osd::analysis
