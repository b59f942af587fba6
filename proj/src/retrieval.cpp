// Copyright 2026 The OSD Authors
// SPDX-License-Identifier: Apache-2.0

#include "osd/retrieval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <unordered_map>

#include <json.hpp>

#include "osd/error.hpp"

namespace osd::retrieval {

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

Document Document::from_text(std::string doc_id, std::string text) {
    Document d{std::move(doc_id), std::move(text), {}};
    d.tokens = tokenize(d.text);
    return d;
}

InvertedIndex InvertedIndex::build(const std::vector<Document>& corpus, Bm25Params params) {
    InvertedIndex idx;
    idx.params_ = params;
    std::set<std::string> seen;
    std::size_t total = 0;
    for (std::size_t d = 0; d < corpus.size(); ++d) {
        const Document& doc = corpus[d];
        if (!seen.insert(doc.doc_id).second) throw CorpusError("duplicate doc_id '" + doc.doc_id + "'");
        idx.doc_ids_.push_back(doc.doc_id);
        idx.doc_lengths_.push_back(doc.tokens.size());
        total += doc.tokens.size();
        std::map<std::string, std::size_t> counts;
        for (const auto& t : doc.tokens) ++counts[t];
        for (const auto& [term, tf] : counts) idx.postings_[term].push_back(Posting{d, tf});
    }
    idx.avgdl_ = corpus.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(corpus.size());
    return idx;
}

std::span<const Posting> InvertedIndex::lookup(std::string_view term) const {
    auto it = postings_.find(std::string(term));
    if (it == postings_.end()) return {};
    return it->second;
}

double InvertedIndex::idf(std::size_t df) const {
    const double n = static_cast<double>(num_docs());
    const double f = static_cast<double>(df);
    return std::log((n - f + 0.5) / (f + 0.5) + 1.0);
}

void InvertedIndex::dump(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write index dump " + path.string());
    for (const auto& [term, list] : postings_) {
        out << term << '\t';
        for (std::size_t i = 0; i < list.size(); ++i) {
            out << (i ? " " : "") << doc_ids_[list[i].doc] << ':' << list[i].tf;
        }
        out << '\n';
    }
}

std::vector<RetrievalResult> top_k(const InvertedIndex& index, std::string_view query, std::size_t k) {
    if (k == 0) throw ArgumentError("top_k: K must be >= 1");
    const Bm25Params& p = index.params();
    std::unordered_map<std::size_t, double> scores;
    // Each query occurrence contributes, so repeated query terms weigh more.
    for (const auto& term : tokenize(query)) {
        const auto postings = index.lookup(term);
        if (postings.empty()) continue;
        const double idf = index.idf(postings.size());
        for (const Posting& post : postings) {
            const double tf = static_cast<double>(post.tf);
            const double len = static_cast<double>(index.doc_lengths()[post.doc]);
            const double norm = 1.0 - p.b + p.b * len / index.avg_doc_length();
            scores[post.doc] += idf * tf * (p.k1 + 1.0) / (tf + p.k1 * norm);
        }
    }
    std::vector<RetrievalResult> results;
    results.reserve(scores.size());
    for (const auto& [doc, score] : scores) results.push_back({index.doc_ids()[doc], score});
    std::sort(results.begin(), results.end(), [](const RetrievalResult& a, const RetrievalResult& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc_id < b.doc_id;
    });
    if (results.size() > k) results.resize(k);
    return results;
}

std::vector<Document> read_corpus_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read corpus " + path.string());
    std::vector<Document> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            out.push_back(Document::from_text(j.at("id").get<std::string>(), j.at("text").get<std::string>()));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void write_corpus_jsonl(const std::filesystem::path& path, const std::vector<Document>& corpus) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write corpus " + path.string());
    for (const auto& d : corpus) out << nlohmann::json{{"id", d.doc_id}, {"text", d.text}}.dump() << '\n';
}

}  // namespace osd::retrieval
