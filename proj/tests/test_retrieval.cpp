// Copyright 2026 The OSD Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <map>

#include <gtest/gtest.h>

#include "osd/error.hpp"
#include "osd/retrieval.hpp"
#include "retrieval_oracles.hpp"

namespace osd::retrieval {
namespace {

using osd::testing::brute_force;
using osd::testing::random_corpus;

TEST(Tokenize, LowercasesAndSplits) {
    EXPECT_EQ(tokenize("The Rival-of  Bako?"), (std::vector<std::string>{"the", "rival", "of", "bako"}));
    EXPECT_TRUE(tokenize("").empty());
    EXPECT_TRUE(tokenize(" ?! ").empty());
    EXPECT_EQ(tokenize("doc007 x1"), (std::vector<std::string>{"doc007", "x1"}));
}

TEST(Bm25, MatchesBruteForceOracle) {
    const auto docs = random_corpus(20, 3);
    const auto index = InvertedIndex::build(docs);
    const std::vector<std::string> queries = {"alpha",        "beta gamma",  "omega omega tau", "rho iota zeta",
                                              "delta kappa",  "sigma",       "eta alpha beta",  "tau rho",
                                              "gamma gamma", "unknownword alpha"};
    for (const auto& q : queries) {
        for (std::size_t k : {1u, 3u, 5u, 20u, 50u}) {
            const auto got = top_k(index, q, k);
            const auto want = brute_force(docs, q, k);
            ASSERT_EQ(got.size(), want.size()) << q << " k=" << k;
            for (std::size_t i = 0; i < got.size(); ++i) {
                EXPECT_EQ(got[i].doc_id, want[i].doc_id) << q << " rank " << i;
                EXPECT_NEAR(got[i].score, want[i].score, 1e-12);
            }
        }
    }
}

TEST(Bm25, PostingsMatchFullScan) {
    const auto docs = random_corpus(20, 4);
    const auto index = InvertedIndex::build(docs);
    std::map<std::string, std::map<std::string, std::size_t>> scan;
    for (const auto& d : docs) {
        for (const auto& t : d.tokens) ++scan[t][d.doc_id];
    }
    ASSERT_EQ(index.postings().size(), scan.size());
    for (const auto& [term, by_doc] : scan) {
        const auto postings = index.lookup(term);
        ASSERT_EQ(postings.size(), by_doc.size()) << term;
        for (const auto& p : postings) EXPECT_EQ(p.tf, by_doc.at(index.doc_ids()[p.doc])) << term;
    }
    EXPECT_TRUE(index.lookup("missing").empty());
}

TEST(Bm25, IdfFormula) {
    const auto index = InvertedIndex::build(random_corpus(10, 1));
    EXPECT_NEAR(index.idf(3), std::log((10 - 3 + 0.5) / 3.5 + 1.0), 1e-15);
    EXPECT_GT(index.idf(10), 0.0);
}

TEST(Bm25, TiesBreakByDocId) {
    const std::vector<Document> docs = {Document::from_text("c", "apple pie"), Document::from_text("a", "apple pie"),
                                        Document::from_text("b", "apple pie")};
    const auto r = top_k(InvertedIndex::build(docs), "apple", 3);
    ASSERT_EQ(r.size(), 3u);
    EXPECT_EQ(r[0].doc_id, "a");
    EXPECT_EQ(r[1].doc_id, "b");
    EXPECT_EQ(r[2].doc_id, "c");
}

TEST(Bm25, EdgeCases) {
    const std::vector<Document> one = {Document::from_text("only", "the cat sat")};
    const auto index = InvertedIndex::build(one);
    EXPECT_EQ(top_k(index, "cat", 5).size(), 1u);
    EXPECT_TRUE(top_k(index, "dog", 5).empty());
    EXPECT_TRUE(top_k(index, "", 5).empty());
    EXPECT_THROW(top_k(index, "cat", 0), ArgumentError);
    const std::vector<Document> dup = {Document::from_text("x", "a"), Document::from_text("x", "b")};
    EXPECT_THROW(InvertedIndex::build(dup), CorpusError);
}

TEST(Corpus, JsonlRoundTrip) {
    const auto docs = random_corpus(5, 9);
    const auto path = std::filesystem::temp_directory_path() / "osd_test_corpus.jsonl";
    write_corpus_jsonl(path, docs);
    const auto back = read_corpus_jsonl(path);
    ASSERT_EQ(back.size(), docs.size());
    for (std::size_t i = 0; i < docs.size(); ++i) {
        EXPECT_EQ(back[i].doc_id, docs[i].doc_id);
        EXPECT_EQ(back[i].text, docs[i].text);
        EXPECT_EQ(back[i].tokens, docs[i].tokens);
    }
    std::filesystem::remove(path);
    EXPECT_THROW(read_corpus_jsonl(path), IoError);
}

}  // namespace
}  // namespace osd::retrieval
