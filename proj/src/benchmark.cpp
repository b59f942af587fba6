// Copyright 2026 The OSD Authors
// SPDX-License-Identifier: Apache-2.0

#include "osd/benchmark.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "osd/error.hpp"
#include "osd/linalg.hpp"

namespace osd::benchmark {

namespace {

using nlohmann::json;

const std::vector<std::string>& relation_words() {
    static const std::vector<std::string> words = {"mentor", "rival",   "partner", "neighbor", "founder",  "owner",
                                                   "leader", "ally",    "student", "creator",  "guardian", "successor"};
    return words;
}

const std::vector<std::string>& template_words() {
    static const std::vector<std::string> words = {"the",    "of",    "is",    "who",   "?",        ".",      ":",
                                                   "question", "answer", "claim", "input", "output", "supports",
                                                   "refutes"};
    return words;
}

std::string entity_name(std::size_t i) {
    static const std::string consonants = "bdfgklmnprstvz";
    static const std::string vowels = "aeiou";
    const std::size_t n_syl = consonants.size() * vowels.size();
    auto syl = [&](std::size_t k) {
        k %= n_syl;
        return std::string{consonants[k / vowels.size()], vowels[k % vowels.size()]};
    };
    std::string name = syl(i) + syl(i / n_syl);
    for (std::size_t rest = i / (n_syl * n_syl); rest > 0; rest /= n_syl) name += syl(rest);
    return name;
}

std::string fact_sentence(const SyntheticWorld& w, std::size_t s, std::size_t r, std::size_t o) {
    return "the " + w.relations[r] + " of " + w.entities[s] + " is " + w.entities[o] + " .";
}

std::string doc_id_for(std::size_t d, std::size_t n_docs) {
    const std::size_t width = std::max<std::size_t>(3, std::to_string(n_docs - 1).size());
    std::string num = std::to_string(d);
    return "doc" + std::string(width - num.size(), '0') + num;
}

/// Uniform other object of the same relation; any other entity when the
/// relation has a single object world-wide.
std::size_t corrupt_object(const SyntheticWorld& w, const Fact& f, std::mt19937_64& rng) {
    std::set<std::size_t> pool;
    for (const Fact& g : w.facts) {
        if (g.relation == f.relation && g.object != f.object) pool.insert(g.object);
    }
    std::vector<std::size_t> cand(pool.begin(), pool.end());
    if (cand.empty()) {
        for (std::size_t e = 0; e < w.entities.size(); ++e) {
            if (e != f.object) cand.push_back(e);
        }
    }
    std::uniform_int_distribution<std::size_t> pick(0, cand.size() - 1);
    return cand[pick(rng)];
}

TaskInstance make_instance(const SyntheticWorld& w, TaskType type, std::size_t fact, bool supports,
                           std::mt19937_64& rng) {
    const Fact& f = w.facts[fact];
    TaskInstance inst;
    inst.task_type = type;
    inst.source_doc_ids = {w.docs[w.doc_of_fact(fact)].doc_id};
    switch (type) {
    case TaskType::qa:
        inst.input = "who is the " + w.relations[f.relation] + " of " + w.entities[f.subject] + " ?";
        inst.gold = w.entities[f.object];
        break;
    case TaskType::slot_fill:
        inst.input = w.entities[f.subject] + " [SEP] " + w.relations[f.relation];
        inst.gold = w.entities[f.object];
        break;
    case TaskType::fact_check: {
        const std::size_t obj = supports ? f.object : corrupt_object(w, f, rng);
        inst.input = fact_sentence(w, f.subject, f.relation, obj);
        inst.gold = supports ? "SUPPORTS" : "REFUTES";
        break;
    }
    }
    return inst;
}

std::vector<std::size_t> fact_doc_table(const SyntheticWorld& w) {
    std::vector<std::size_t> table(w.facts.size(), w.docs.size());
    for (std::size_t d = 0; d < w.docs.size(); ++d) {
        for (std::size_t f : w.docs[d].facts) table.at(f) = d;
    }
    return table;
}

/// Fact whose subject is `fact`'s object, in a different document.
std::optional<std::size_t> find_bridge(const SyntheticWorld& w, const std::vector<std::size_t>& fact_doc,
                                       std::size_t fact) {
    for (std::size_t g = 0; g < w.facts.size(); ++g) {
        if (w.facts[g].subject == w.facts[fact].object && fact_doc[g] != fact_doc[fact]) return g;
    }
    return std::nullopt;
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::vector<std::string> split_ws(std::string_view s) {
    std::vector<std::string> out;
    std::istringstream in{std::string(s)};
    for (std::string w; in >> w;) out.push_back(std::move(w));
    return out;
}

}  // namespace

std::size_t SyntheticWorld::doc_of_fact(std::size_t fact) const {
    for (std::size_t d = 0; d < docs.size(); ++d) {
        if (std::find(docs[d].facts.begin(), docs[d].facts.end(), fact) != docs[d].facts.end()) return d;
    }
    throw LookupError("fact " + std::to_string(fact) + " belongs to no document");
}

std::size_t max_relations() { return relation_words().size(); }

GeneratedWorld gen_world(std::uint64_t seed, std::size_t n_entities, std::size_t n_relations, std::size_t n_docs) {
    if (n_entities < 1 || n_relations < 1 || n_docs < 1) throw ArgumentError("gen_world: counts must be >= 1");
    if (n_relations > max_relations()) {
        throw CapacityError("capacity error: at most " + std::to_string(max_relations()) + " relations available");
    }
    if (n_entities < 2) throw CapacityError("capacity error: need at least 2 entities for subject != object");

    std::mt19937_64 rng(training::derive_seed(seed, "world"));
    SyntheticWorld w;
    w.seed = seed;
    for (std::size_t i = 0; i < n_entities; ++i) w.entities.push_back(entity_name(i));
    w.relations.assign(relation_words().begin(), relation_words().begin() + static_cast<std::ptrdiff_t>(n_relations));

    std::uniform_int_distribution<std::size_t> per_doc(3, 6);
    std::vector<std::size_t> counts(n_docs);
    std::size_t total = 0;
    for (auto& c : counts) total += (c = per_doc(rng));
    const std::size_t capacity = n_entities * n_relations;
    if (total > capacity) {
        throw CapacityError("capacity error: " + std::to_string(total) + " facts requested but only " +
                            std::to_string(capacity) + " (subject, relation) pairs exist");
    }

    std::set<std::pair<std::size_t, std::size_t>> used;
    std::uniform_int_distribution<std::size_t> pick_entity(0, n_entities - 1);
    std::uniform_int_distribution<std::size_t> pick_other(0, n_entities - 2);
    std::uniform_int_distribution<std::size_t> pick_relation(0, n_relations - 1);
    for (std::size_t d = 0; d < n_docs; ++d) {
        WorldDoc doc{doc_id_for(d, n_docs), {}};
        for (std::size_t k = 0; k < counts[d]; ++k) {
            std::size_t s = 0;
            std::size_t r = 0;
            do {
                s = pick_entity(rng);
                r = pick_relation(rng);
            } while (!used.insert({s, r}).second);
            std::size_t o = pick_other(rng);
            if (o >= s) ++o;
            doc.facts.push_back(w.facts.size());
            w.facts.push_back({s, r, o});
        }
        w.docs.push_back(std::move(doc));
    }
    GeneratedWorld out{std::move(w), {}};
    out.corpus = render_corpus(out.world);
    return out;
}

std::vector<retrieval::Document> render_corpus(const SyntheticWorld& world) {
    std::vector<retrieval::Document> corpus;
    corpus.reserve(world.docs.size());
    for (const auto& doc : world.docs) {
        std::string text;
        for (std::size_t f : doc.facts) {
            const Fact& x = world.facts[f];
            if (!text.empty()) text += ' ';
            text += fact_sentence(world, x.subject, x.relation, x.object);
        }
        corpus.push_back(retrieval::Document::from_text(doc.doc_id, std::move(text)));
    }
    return corpus;
}

std::vector<TaskInstance> gen_instances(const SyntheticWorld& world, TaskType type, std::size_t per_doc,
                                        std::size_t multi_hop_every) {
    std::mt19937_64 rng(training::derive_seed(world.seed, "instances/" + adapters::to_string(type)));
    const auto fact_doc = fact_doc_table(world);
    std::vector<TaskInstance> out;
    for (std::size_t d = 0; d < world.docs.size(); ++d) {
        const auto& facts = world.docs[d].facts;
        if (facts.empty()) continue;
        // Fact-check labels alternate from a random start so each document is balanced within one.
        bool supports = std::bernoulli_distribution(0.5)(rng);
        for (std::size_t j = 0; j < per_doc; ++j) {
            const std::size_t fact = facts[j % facts.size()];
            const bool last = j + 1 == per_doc;
            if (type == TaskType::qa && last && per_doc >= 3 && multi_hop_every > 0 && d % multi_hop_every == 0) {
                if (const auto bridge = find_bridge(world, fact_doc, fact)) {
                    const Fact& f1 = world.facts[fact];
                    const Fact& f2 = world.facts[*bridge];
                    TaskInstance inst;
                    inst.task_type = type;
                    inst.input = "who is the " + world.relations[f2.relation] + " of the " +
                                 world.relations[f1.relation] + " of " + world.entities[f1.subject] + " ?";
                    inst.gold = world.entities[f2.object];
                    inst.source_doc_ids = {world.docs[d].doc_id, world.docs[fact_doc[*bridge]].doc_id};
                    out.push_back(std::move(inst));
                    continue;
                }
            }
            out.push_back(make_instance(world, type, fact, supports, rng));
            supports = !supports;
        }
    }
    return out;
}

std::vector<TaskInstance> gen_task_corpus(const SyntheticWorld& world, TaskType type, std::uint64_t seed) {
    std::mt19937_64 rng(training::derive_seed(seed, "task-corpus/" + adapters::to_string(type)));
    std::vector<TaskInstance> out;
    for (const auto& doc : world.docs) {
        if (doc.facts.empty()) continue;
        std::uniform_int_distribution<std::size_t> pick(0, doc.facts.size() - 1);
        const std::size_t fact = doc.facts[pick(rng)];
        const bool supports = std::bernoulli_distribution(0.5)(rng);
        out.push_back(make_instance(world, type, fact, supports, rng));
    }
    return out;
}

std::vector<TaskInstance> gen_doc_training(const SyntheticWorld& world, std::size_t doc, TaskType type,
                                           std::uint64_t seed) {
    if (doc >= world.docs.size()) throw LookupError("document index " + std::to_string(doc) + " out of range");
    std::mt19937_64 rng(training::derive_seed(seed, "doc-train/" + world.docs[doc].doc_id));
    std::vector<TaskInstance> out;
    for (std::size_t fact : world.docs[doc].facts) {
        out.push_back(make_instance(world, type, fact, true, rng));
        if (type == TaskType::fact_check) out.push_back(make_instance(world, type, fact, false, rng));
    }
    return out;
}

std::uint64_t corpus_hash(const std::vector<retrieval::Document>& corpus) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::string_view s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        h ^= 0xff;
        h *= 0x100000001b3ULL;
    };
    for (const auto& d : corpus) {
        mix(d.doc_id);
        mix(d.text);
    }
    return h;
}

Vocab Vocab::for_world(const SyntheticWorld& world) {
    Vocab v;
    auto add = [&v](const std::string& w) {
        if (!v.ids_.emplace(w, static_cast<int>(v.words_.size())).second) {
            throw CorpusError("vocabulary word '" + w + "' is not unique");
        }
        v.words_.push_back(w);
    };
    for (const char* s : {"<pad>", "<bos>", "<eos>", "[sep]"}) add(s);
    for (const auto& w : template_words()) add(w);
    for (const auto& w : world.relations) add(w);
    for (const auto& w : world.entities) add(w);
    return v;
}

int Vocab::id(std::string_view word) const {
    auto it = ids_.find(lower(word));
    if (it == ids_.end()) throw LookupError("word '" + std::string(word) + "' is not in the vocabulary");
    return it->second;
}

const std::string& Vocab::word(int id) const {
    if (id < 0 || id >= size()) throw LookupError("token id " + std::to_string(id) + " out of range");
    return words_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocab::encode(std::string_view text) const {
    std::vector<int> ids;
    for (const auto& w : split_ws(text)) ids.push_back(id(w));
    return ids;
}

std::string Vocab::decode(const std::vector<int>& ids) const {
    std::string out;
    for (int id : ids) {
        if (id == pad() || id == bos() || id == eos()) continue;
        if (!out.empty()) out += ' ';
        out += id == sep() ? "[SEP]" : word(id);
    }
    return out;
}

std::string render_prompt(const TaskInstance& inst) {
    switch (inst.task_type) {
    case TaskType::qa:
        return "question : " + inst.input + " answer :";
    case TaskType::fact_check:
        return "claim : " + inst.input + " output :";
    case TaskType::slot_fill:
        return "input : " + inst.input + " output :";
    }
    throw ArgumentError("unknown task type");
}

std::vector<int> prompt_ids(const Vocab& vocab, const TaskInstance& inst) {
    std::vector<int> ids{vocab.bos()};
    const auto body = vocab.encode(render_prompt(inst));
    ids.insert(ids.end(), body.begin(), body.end());
    return ids;
}

model::Sequence make_sequence(const Vocab& vocab, const TaskInstance& inst) {
    std::vector<int> full = prompt_ids(vocab, inst);
    const std::size_t prompt_len = full.size();
    const auto answer = vocab.encode(inst.gold);
    full.insert(full.end(), answer.begin(), answer.end());
    full.push_back(vocab.eos());
    model::Sequence seq;
    seq.tokens.assign(full.begin(), full.end() - 1);
    seq.targets.assign(full.begin() + 1, full.end());
    seq.loss_mask.resize(seq.tokens.size());
    for (std::size_t t = 0; t < seq.tokens.size(); ++t) seq.loss_mask[t] = t + 1 >= prompt_len;
    return seq;
}

training::TaskCorpus make_task_corpus(const Vocab& vocab, const std::vector<TaskInstance>& instances) {
    training::TaskCorpus c;
    if (!instances.empty()) c.task_type = instances.front().task_type;
    for (const auto& inst : instances) c.examples.push_back(make_sequence(vocab, inst));
    return c;
}

training::DocumentCorpus make_document_corpus(const Vocab& vocab, const std::string& doc_id,
                                              const std::vector<TaskInstance>& instances) {
    training::DocumentCorpus c{doc_id, {}};
    for (const auto& inst : instances) c.examples.push_back(make_sequence(vocab, inst));
    return c;
}

std::string normalize_answer(std::string_view s) {
    std::string cleaned;
    for (char ch : s) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::ispunct(c)) continue;
        cleaned.push_back(static_cast<char>(std::tolower(c)));
    }
    std::string out;
    for (const auto& w : split_ws(cleaned)) {
        if (w == "a" || w == "an" || w == "the") continue;
        if (!out.empty()) out += ' ';
        out += w;
    }
    return out;
}

double f1_token(std::string_view prediction, std::string_view gold) {
    const auto p = split_ws(normalize_answer(prediction));
    const auto g = split_ws(normalize_answer(gold));
    if (p.empty() || g.empty()) return p.empty() && g.empty() ? 1.0 : 0.0;
    std::map<std::string, int> counts;
    for (const auto& w : g) ++counts[w];
    std::size_t common = 0;
    for (const auto& w : p) {
        auto it = counts.find(w);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++common;
        }
    }
    if (common == 0) return 0.0;
    const double precision = static_cast<double>(common) / static_cast<double>(p.size());
    const double recall = static_cast<double>(common) / static_cast<double>(g.size());
    return 2.0 * precision * recall / (precision + recall);
}

int accuracy(std::string_view prediction, std::string_view gold) {
    return normalize_answer(prediction) == normalize_answer(gold) ? 1 : 0;
}

double score(TaskType type, std::string_view prediction, std::string_view gold) {
    return type == TaskType::fact_check ? static_cast<double>(accuracy(prediction, gold)) : f1_token(prediction, gold);
}

std::string metric_name(TaskType type) { return type == TaskType::fact_check ? "accuracy" : "f1"; }

void write_instances_jsonl(const std::filesystem::path& path, const std::vector<TaskInstance>& instances) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write instances " + path.string());
    for (const auto& inst : instances) {
        out << json{{"task_type", adapters::to_string(inst.task_type)},
                    {"input", inst.input},
                    {"gold", inst.gold},
                    {"source_doc_ids", inst.source_doc_ids}}
                   .dump()
            << '\n';
    }
}

std::vector<TaskInstance> read_instances_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read instances " + path.string());
    std::vector<TaskInstance> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            const auto j = json::parse(line);
            TaskInstance inst;
            inst.task_type = adapters::parse_task_type(j.at("task_type").get<std::string>());
            inst.input = j.at("input").get<std::string>();
            inst.gold = j.at("gold").get<std::string>();
            inst.source_doc_ids = j.at("source_doc_ids").get<std::vector<std::string>>();
            out.push_back(std::move(inst));
        } catch (const json::exception& e) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void write_world_json(const std::filesystem::path& path, const SyntheticWorld& world) {
    json docs = json::array();
    for (const auto& d : world.docs) {
        json facts = json::array();
        for (std::size_t f : d.facts) {
            const Fact& x = world.facts[f];
            facts.push_back({x.subject, x.relation, x.object});
        }
        docs.push_back({{"id", d.doc_id}, {"facts", facts}});
    }
    const json j{{"seed", world.seed}, {"entities", world.entities}, {"relations", world.relations}, {"docs", docs}};
    std::ofstream out(path);
    if (!out) throw IoError("cannot write world " + path.string());
    out << j.dump(1) << '\n';
}

SyntheticWorld read_world_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read world " + path.string());
    try {
        const json j = json::parse(in);
        SyntheticWorld w;
        w.seed = j.at("seed").get<std::uint64_t>();
        w.entities = j.at("entities").get<std::vector<std::string>>();
        w.relations = j.at("relations").get<std::vector<std::string>>();
        for (const auto& d : j.at("docs")) {
            WorldDoc doc{d.at("id").get<std::string>(), {}};
            for (const auto& f : d.at("facts")) {
                const auto t = f.get<std::vector<std::size_t>>();
                if (t.size() != 3 || t[0] >= w.entities.size() || t[1] >= w.relations.size() ||
                    t[2] >= w.entities.size()) {
                    throw FormatError("malformed fact in " + path.string());
                }
                doc.facts.push_back(w.facts.size());
                w.facts.push_back({t[0], t[1], t[2]});
            }
            w.docs.push_back(std::move(doc));
        }
        return w;
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

}  // namespace osd::benchmark
