// Copyright 2026 The OSD Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "osd/adapters.hpp"
#include "osd/commands.hpp"
#include "osd/error.hpp"
#include "osd/run_config.hpp"

namespace {

std::vector<std::size_t> parse_k_list(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) {
        std::size_t used = 0;
        long long v = -1;
        try {
            v = std::stoll(item, &used);
        } catch (const std::exception&) {
        }
        if (v < 1 || used != item.size()) throw osd::ConfigError("--k: bad entry '" + item + "'");
        out.push_back(static_cast<std::size_t>(v));
    }
    if (out.empty()) throw osd::ConfigError("--k: empty list");
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Orthogonal task/knowledge adapter experiments on a synthetic world"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
    std::optional<std::string> out;
    std::optional<std::string> variant;
    std::optional<std::string> k_list;
    std::optional<std::string> weight_mode;

    app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "Global seed");
    app.add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
    app.add_option("--out", out, "Output directory");

    auto* gen = app.add_subcommand("gen", "Generate the synthetic world, corpus and instances");
    auto* index = app.add_subcommand("index", "Build the BM25 index and dump postings");
    auto* train_task = app.add_subcommand("train-task", "Train the task adapter for every seed");
    auto* train_docs = app.add_subcommand("train-docs", "Train one knowledge adapter per document");
    train_docs->add_option("--variant", variant, "entangled, soft or hard (default: all)")
        ->check(CLI::IsMember({"entangled", "soft", "hard"}));
    auto* eval = app.add_subcommand("eval", "Run the retrieval-depth sweep");
    eval->add_option("--k", k_list, "Comma-separated K list");
    eval->add_option("--weight-mode", weight_mode, "uniform or score")->check(CLI::IsMember({"uniform", "score"}));
    auto* analyze = app.add_subcommand("analyze", "Adapter similarity between document pairs");
    for (auto* sub : {gen, index, train_task, train_docs, eval, analyze}) sub->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        osd::cli::RunConfig config;
        if (!config_path.empty()) config = osd::cli::RunConfig::load(config_path);
        if (seed) config.seed = *seed;
        if (jobs) config.jobs = *jobs;
        if (out) config.out = *out;
        if (k_list) config.sweep.k_list = parse_k_list(*k_list);
        if (weight_mode) config.sweep.weight_mode = *weight_mode;
        config.validate();

        if (gen->parsed()) return osd::cli::cmd_gen(config, std::cout);
        if (index->parsed()) return osd::cli::cmd_index(config, std::cout);
        if (train_task->parsed()) return osd::cli::cmd_train_task(config, std::cout);
        if (train_docs->parsed()) {
            std::optional<osd::adapters::Variant> v;
            if (variant) v = osd::adapters::parse_variant(*variant);
            return osd::cli::cmd_train_docs(config, v, std::cout);
        }
        if (eval->parsed()) return osd::cli::cmd_eval(config, std::cout);
        if (analyze->parsed()) return osd::cli::cmd_analyze(config, std::cout);
    } catch (const osd::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
