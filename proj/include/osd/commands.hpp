// Copyright 2026 The OSD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <ostream>

#include "osd/adapters.hpp"
#include "osd/run_config.hpp"

namespace osd::cli {

/// Files a run directory holds, relative to RunConfig::out.
struct RunLayout {
    std::filesystem::path root;

    std::filesystem::path config() const { return root / "config.resolved.json"; }
    std::filesystem::path world() const { return root / "world.json"; }
    std::filesystem::path corpus() const { return root / "corpus.jsonl"; }
    std::filesystem::path instances() const { return root / "instances.jsonl"; }
    std::filesystem::path task_corpus() const { return root / "task_corpus.jsonl"; }
    std::filesystem::path index_dump() const { return root / "index.tsv"; }
    std::filesystem::path seed_dir(std::uint64_t seed) const { return root / "adapters" / ("seed" + std::to_string(seed)); }
    std::filesystem::path task_checkpoint(std::uint64_t seed) const { return seed_dir(seed) / "task.osda"; }
    std::filesystem::path knowledge_dir(std::uint64_t seed, adapters::Variant v) const {
        return seed_dir(seed) / adapters::to_string(v);
    }
    std::filesystem::path knowledge_checkpoint(std::uint64_t seed, adapters::Variant v, const std::string& doc) const {
        return knowledge_dir(seed, v) / (doc + ".osda");
    }
    std::filesystem::path reports() const { return root / "reports"; }
};

/// `out`, placed under $OSD_OUT_ROOT when that is set and `out` is relative.
std::filesystem::path resolve_out(const std::string& out);

int cmd_gen(const RunConfig& config, std::ostream& log);
int cmd_index(const RunConfig& config, std::ostream& log);
int cmd_train_task(const RunConfig& config, std::ostream& log);

/// All three variants when `variant` is empty. Skips documents whose
/// checkpoint already loads cleanly.
int cmd_train_docs(const RunConfig& config, std::optional<adapters::Variant> variant, std::ostream& log);

/// Nonzero only when every sweep cell failed.
int cmd_eval(const RunConfig& config, std::ostream& log);
int cmd_analyze(const RunConfig& config, std::ostream& log);

}  // namespace osd::cli
