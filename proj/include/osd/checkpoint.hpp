// Copyright 2026 The OSD Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "osd/adapters.hpp"

namespace osd::cli {

/// Binary adapter file:
///   "OSDA" | u32 version | u64 header_len | JSON header | f64 payload | u64 FNV-1a(payload)
/// All integers and floats little-endian; matrices row-major in header order.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const adapters::TaskAdapter& adapter);
std::string encode_checkpoint(const adapters::KnowledgeAdapter& adapter);

adapters::TaskAdapter decode_task_checkpoint(std::string_view bytes);

/// Hard adapters come back with a, b and a_hat but no cached bases.
adapters::KnowledgeAdapter decode_knowledge_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const adapters::TaskAdapter& adapter);
void save_checkpoint(const std::filesystem::path& path, const adapters::KnowledgeAdapter& adapter);
adapters::TaskAdapter load_task_checkpoint(const std::filesystem::path& path);
adapters::KnowledgeAdapter load_knowledge_checkpoint(const std::filesystem::path& path);

/// Write to a sibling temp file, then rename over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace osd::cli
