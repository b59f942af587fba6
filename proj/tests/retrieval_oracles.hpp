// Copyright 2026 The OSD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "osd/retrieval.hpp"

namespace osd::testing {

using retrieval::Document;
using retrieval::RetrievalResult;
using retrieval::tokenize;

inline std::vector<Document> random_corpus(std::size_t n, std::uint64_t seed) {
    const std::vector<std::string> words = {"alpha", "beta", "gamma", "delta", "omega", "kappa", "sigma", "tau",
                                            "zeta", "eta", "iota", "rho"};
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> len(3, 15);
    std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
    std::vector<Document> docs;
    for (std::size_t i = 0; i < n; ++i) {
        std::string text;
        const std::size_t l = len(rng);
        for (std::size_t w = 0; w < l; ++w) text += words[pick(rng) % (w % 3 == 0 ? 4 : words.size())] + " ";
        char id[16];
        std::snprintf(id, sizeof id, "d%02zu", (i * 7) % n);
        docs.push_back(Document::from_text(id, text));
    }
    return docs;
}

/// Brute force over every document with no index.
inline std::vector<RetrievalResult> brute_force(const std::vector<Document>& docs, const std::string& query, std::size_t k,
                                         double k1 = 1.2, double b = 0.75) {
    const double n = static_cast<double>(docs.size());
    double avgdl = 0.0;
    for (const auto& d : docs) avgdl += static_cast<double>(d.tokens.size());
    avgdl /= n;
    const std::vector<std::string> q = tokenize(query);
    std::vector<RetrievalResult> all;
    for (const auto& d : docs) {
        double score = 0.0;
        bool any = false;
        for (const auto& term : q) {
            double df = 0;
            for (const auto& o : docs) df += std::count(o.tokens.begin(), o.tokens.end(), term) > 0;
            const double tf = static_cast<double>(std::count(d.tokens.begin(), d.tokens.end(), term));
            if (tf == 0) continue;
            any = true;
            const double idf = std::log((n - df + 0.5) / (df + 0.5) + 1.0);
            const double dl = static_cast<double>(d.tokens.size());
            score += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl));
        }
        if (any) all.push_back({d.doc_id, score});
    }
    std::sort(all.begin(), all.end(), [](const auto& x, const auto& y) {
        return x.score != y.score ? x.score > y.score : x.doc_id < y.doc_id;
    });
    if (all.size() > k) all.resize(k);
    return all;
}

}  // namespace osd::testing
