// Copyright 2026 The OSD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace osd::retrieval {

struct Document {
    std::string doc_id;
    std::string text;
    std::vector<std::string> tokens;

    static Document from_text(std::string doc_id, std::string text);
};

struct Posting {
    std::size_t doc = 0;  // index into InvertedIndex::doc_ids
    std::size_t tf = 0;
};

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

/// Okapi BM25 over an in-memory inverted index. Immutable after build.
class InvertedIndex {
public:
    static InvertedIndex build(const std::vector<Document>& corpus, Bm25Params params = {});

    std::size_t num_docs() const noexcept { return doc_ids_.size(); }
    double avg_doc_length() const noexcept { return avgdl_; }
    const Bm25Params& params() const noexcept { return params_; }
    const std::vector<std::string>& doc_ids() const noexcept { return doc_ids_; }
    const std::vector<std::size_t>& doc_lengths() const noexcept { return doc_lengths_; }
    const std::map<std::string, std::vector<Posting>>& postings() const noexcept { return postings_; }

    /// Empty span when the term does not occur.
    std::span<const Posting> lookup(std::string_view term) const;

    /// ln((N - df + 0.5) / (df + 0.5) + 1).
    double idf(std::size_t df) const;

    /// One line per term: term<TAB>doc_id:tf ...
    void dump(const std::filesystem::path& path) const;

private:
    Bm25Params params_;
    std::vector<std::string> doc_ids_;
    std::vector<std::size_t> doc_lengths_;
    double avgdl_ = 0.0;
    std::map<std::string, std::vector<Posting>> postings_;
};

struct RetrievalResult {
    std::string doc_id;
    double score = 0.0;
};

/// Lowercase, split on non-alphanumeric runs. No stemming, no stopwords.
std::vector<std::string> tokenize(std::string_view text);

/// Highest-scoring min(K, matching) documents; ties broken by ascending doc_id.
std::vector<RetrievalResult> top_k(const InvertedIndex& index, std::string_view query, std::size_t k);

/// Reads {"id": ..., "text": ...} objects, one per line.
std::vector<Document> read_corpus_jsonl(const std::filesystem::path& path);
void write_corpus_jsonl(const std::filesystem::path& path, const std::vector<Document>& corpus);

}  // namespace osd::retrieval
