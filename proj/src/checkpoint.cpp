// Copyright 2026 The OSD Authors
// SPDX-License-Identifier: Apache-2.0

#include "osd/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "osd/error.hpp"

namespace osd::cli {

namespace {

using adapters::KnowledgeAdapter;
using adapters::LoraLayer;
using adapters::TaskAdapter;
using linalg::Matrix;
using nlohmann::json;

constexpr std::string_view kMagic = "OSDA";

template <class T>
void put_le(std::string& out, T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
}

template <class T>
T get_le(std::string_view bytes, std::size_t pos) {
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
    return v;
}

struct PayloadWriter {
    std::string payload;

    json add(const std::string& name, const Matrix& m) {
        json desc{{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}, {"offset", payload.size()}};
        for (double x : m.values()) put_le(payload, std::bit_cast<std::uint64_t>(x));
        return desc;
    }
};

std::string assemble(json header, const std::string& payload) {
    header["payload_bytes"] = payload.size();
    const std::string text = header.dump();
    std::string out(kMagic);
    put_le<std::uint32_t>(out, kCheckpointVersion);
    put_le<std::uint64_t>(out, text.size());
    out += text;
    out += payload;
    put_le<std::uint64_t>(out, fnv1a64(payload));
    return out;
}

struct Parsed {
    json header;
    std::string_view payload;
};

Parsed parse(std::string_view bytes) {
    constexpr std::size_t fixed = 4 + 4 + 8;
    if (bytes.size() < fixed + 8 || bytes.substr(0, 4) != kMagic) throw FormatError("checkpoint: bad magic");
    const auto version = get_le<std::uint32_t>(bytes, 4);
    if (version != kCheckpointVersion) throw FormatError("checkpoint: unsupported version " + std::to_string(version));
    const auto header_len = get_le<std::uint64_t>(bytes, 8);
    if (header_len > bytes.size() - fixed - 8) throw FormatError("checkpoint: truncated header");
    Parsed p;
    try {
        p.header = json::parse(bytes.substr(fixed, header_len));
    } catch (const json::exception& e) {
        throw FormatError(std::string("checkpoint: header is not valid JSON: ") + e.what());
    }
    const std::size_t payload_len = p.header.value("payload_bytes", std::size_t{0});
    if (fixed + header_len + payload_len + 8 != bytes.size()) throw FormatError("checkpoint: size does not match header");
    p.payload = bytes.substr(fixed + header_len, payload_len);
    const auto stored = get_le<std::uint64_t>(bytes, fixed + header_len + payload_len);
    if (stored != fnv1a64(p.payload)) throw ChecksumError("checkpoint: payload checksum mismatch");
    return p;
}

/// Reads matrices in header order, checking that they tile the payload exactly.
class PayloadReader {
public:
    explicit PayloadReader(std::string_view payload) : payload_(payload) {}

    Matrix read(const json& desc, const std::string& expected_name) {
        if (desc.at("name").get<std::string>() != expected_name) {
            throw FormatError("checkpoint: expected matrix '" + expected_name + "'");
        }
        const auto rows = desc.at("rows").get<std::size_t>();
        const auto cols = desc.at("cols").get<std::size_t>();
        const auto offset = desc.at("offset").get<std::size_t>();
        if (offset != cursor_) throw FormatError("checkpoint: matrix offsets do not tile the payload");
        const std::size_t n = rows * cols;
        if (cursor_ + 8 * n > payload_.size()) throw FormatError("checkpoint: matrix runs past payload");
        Matrix m(rows, cols);
        auto v = m.values();
        for (std::size_t i = 0; i < n; ++i) v[i] = std::bit_cast<double>(get_le<std::uint64_t>(payload_, cursor_ + 8 * i));
        cursor_ += 8 * n;
        return m;
    }

    void finish() const {
        if (cursor_ != payload_.size()) throw FormatError("checkpoint: trailing payload bytes");
    }

private:
    std::string_view payload_;
    std::size_t cursor_ = 0;
};

json site_entry(PayloadWriter& w, const LoraLayer& l, const Matrix* a_hat) {
    json mats = json::array({w.add("a", l.a), w.add("b", l.b)});
    if (a_hat) mats.push_back(w.add("a_hat", *a_hat));
    return {{"site", l.site.str()}, {"matrices", mats}};
}

std::vector<LoraLayer> read_layers(const json& header, PayloadReader& reader, std::vector<Matrix>* a_hat) {
    std::vector<LoraLayer> layers;
    for (const auto& s : header.at("sites")) {
        const auto& mats = s.at("matrices");
        if (mats.size() != (a_hat ? 3u : 2u)) throw FormatError("checkpoint: wrong matrix count per site");
        LoraLayer l{adapters::SiteId::parse(s.at("site").get<std::string>()), reader.read(mats[0], "a"),
                    reader.read(mats[1], "b")};
        l.validate();
        if (a_hat) a_hat->push_back(reader.read(mats[2], "a_hat"));
        layers.push_back(std::move(l));
    }
    reader.finish();
    return layers;
}

template <class Fn>
auto with_format_errors(Fn&& fn) {
    try {
        return fn();
    } catch (const json::exception& e) {
        throw FormatError(std::string("checkpoint: malformed header: ") + e.what());
    }
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string encode_checkpoint(const TaskAdapter& adapter) {
    PayloadWriter w;
    json sites = json::array();
    for (const auto& l : adapter.layers) sites.push_back(site_entry(w, l, nullptr));
    const json header{{"kind", "task"},
                      {"task_type", adapters::to_string(adapter.task_type)},
                      {"rank", adapter.rank},
                      {"sites", sites}};
    return assemble(header, w.payload);
}

std::string encode_checkpoint(const KnowledgeAdapter& adapter) {
    const bool hard = adapter.variant == adapters::Variant::hard;
    if (hard && adapter.a_hat.size() != adapter.layers.size()) {
        throw StructuralError("hard adapter '" + adapter.doc_id + "' has no a_hat");
    }
    PayloadWriter w;
    json sites = json::array();
    for (std::size_t i = 0; i < adapter.layers.size(); ++i) {
        sites.push_back(site_entry(w, adapter.layers[i], hard ? &adapter.a_hat[i] : nullptr));
    }
    json header{{"kind", "knowledge"},
                {"variant", adapters::to_string(adapter.variant)},
                {"doc_id", adapter.doc_id},
                {"rank", adapter.rank},
                {"sites", sites}};
    if (hard) header["tau"] = adapter.tau;
    return assemble(header, w.payload);
}

TaskAdapter decode_task_checkpoint(std::string_view bytes) {
    const Parsed p = parse(bytes);
    return with_format_errors([&] {
        if (p.header.at("kind") != "task") throw FormatError("checkpoint: not a task adapter");
        TaskAdapter t;
        t.task_type = adapters::parse_task_type(p.header.at("task_type").get<std::string>());
        t.rank = p.header.at("rank").get<std::size_t>();
        PayloadReader reader(p.payload);
        t.layers = read_layers(p.header, reader, nullptr);
        return t;
    });
}

KnowledgeAdapter decode_knowledge_checkpoint(std::string_view bytes) {
    const Parsed p = parse(bytes);
    return with_format_errors([&] {
        if (p.header.at("kind") != "knowledge") throw FormatError("checkpoint: not a knowledge adapter");
        KnowledgeAdapter k;
        k.doc_id = p.header.at("doc_id").get<std::string>();
        k.variant = adapters::parse_variant(p.header.at("variant").get<std::string>());
        k.rank = p.header.at("rank").get<std::size_t>();
        const bool hard = k.variant == adapters::Variant::hard;
        if (hard) k.tau = p.header.at("tau").get<double>();
        PayloadReader reader(p.payload);
        k.layers = read_layers(p.header, reader, hard ? &k.a_hat : nullptr);
        return k;
    });
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
    std::ostringstream suffix;
    suffix << ".tmp" << std::hash<std::thread::id>{}(std::this_thread::get_id());
    std::filesystem::path tmp = path;
    tmp += suffix.str();
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("short write to " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void save_checkpoint(const std::filesystem::path& path, const TaskAdapter& adapter) {
    write_file_atomic(path, encode_checkpoint(adapter));
}

void save_checkpoint(const std::filesystem::path& path, const KnowledgeAdapter& adapter) {
    write_file_atomic(path, encode_checkpoint(adapter));
}

TaskAdapter load_task_checkpoint(const std::filesystem::path& path) {
    try {
        return decode_task_checkpoint(read_file(path));
    } catch (const ChecksumError& e) {
        throw ChecksumError(path.string() + ": " + e.what());
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

KnowledgeAdapter load_knowledge_checkpoint(const std::filesystem::path& path) {
    try {
        return decode_knowledge_checkpoint(read_file(path));
    } catch (const ChecksumError& e) {
        throw ChecksumError(path.string() + ": " + e.what());
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

}  // namespace osd::cli
