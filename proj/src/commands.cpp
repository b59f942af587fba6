// Copyright 2026 The OSD Authors
// SPDX-License-Identifier: Apache-2.0

#include "osd/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <set>

#include <json.hpp>

#include "osd/analysis.hpp"
#include "osd/benchmark.hpp"
#include "osd/checkpoint.hpp"
#include "osd/error.hpp"
#include "osd/parallel.hpp"
#include "osd/retrieval.hpp"
#include "osd/sweep.hpp"
#include "osd/training.hpp"

namespace osd::cli {

namespace fs = std::filesystem;

namespace {

using adapters::Variant;
using nlohmann::json;

constexpr Variant kAllVariants[] = {Variant::entangled, Variant::soft, Variant::hard};

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

RunLayout prepare(const RunConfig& config) {
    RunLayout layout{resolve_out(config.out)};
    std::error_code ec;
    fs::create_directories(layout.root, ec);
    if (ec) throw IoError("cannot create output directory " + layout.root.string() + ": " + ec.message());
    write_file_atomic(layout.config(), config.to_json_text());
    return layout;
}

void require(const fs::path& p, const std::string& hint) {
    if (!fs::exists(p)) throw DependencyError(p.string() + " not found; " + hint);
}

struct Workspace {
    benchmark::SyntheticWorld world;
    benchmark::Vocab vocab;
    model::BaseWeights base;
};

Workspace open_workspace(const RunConfig& config, const RunLayout& layout) {
    require(layout.world(), "run `osd gen` first");
    Workspace ws;
    ws.world = benchmark::read_world_json(layout.world());
    ws.vocab = benchmark::Vocab::for_world(ws.world);
    ws.base = model::init_base(config.model_config(ws.vocab.size()));
    return ws;
}

json report_json(const training::TrainReport& r) {
    json steps = json::array();
    for (const auto& s : r.steps) steps.push_back({{"total", s.total}, {"ce", s.ce}, {"ortho", s.ortho}});
    return {{"final_ce", r.final_ce},
            {"final_ortho", r.final_ortho ? json(*r.final_ortho) : json(nullptr)},
            {"step_count", r.step_count},
            {"steps", steps}};
}

bool checkpoint_valid(const fs::path& path, const std::string& doc_id, Variant variant) {
    if (!fs::exists(path)) return false;
    try {
        const auto k = load_knowledge_checkpoint(path);
        return k.doc_id == doc_id && k.variant == variant;
    } catch (const Error&) {
        return false;
    }
}

}  // namespace

fs::path resolve_out(const std::string& out) {
    fs::path p(out);
    if (const char* root = std::getenv("OSD_OUT_ROOT"); root && *root && p.is_relative()) return fs::path(root) / p;
    return p;
}

int cmd_gen(const RunConfig& config, std::ostream& log) {
    const auto& w = config.world;
    const auto generated = benchmark::gen_world(config.seed, w.n_entities, w.n_relations, w.n_docs);
    const auto instances = benchmark::gen_instances(generated.world, w.task_type, w.per_doc, w.multi_hop_every);
    const auto task_corpus = benchmark::gen_task_corpus(generated.world, w.task_type, config.seed);
    const RunLayout layout = prepare(config);
    benchmark::write_world_json(layout.world(), generated.world);
    retrieval::write_corpus_jsonl(layout.corpus(), generated.corpus);
    benchmark::write_instances_jsonl(layout.instances(), instances);
    benchmark::write_instances_jsonl(layout.task_corpus(), task_corpus);
    log << "documents " << generated.corpus.size() << "\n"
        << "facts " << generated.world.facts.size() << "\n"
        << "instances " << instances.size() << "\n"
        << "task_corpus " << task_corpus.size() << "\n"
        << "corpus_hash " << hex64(benchmark::corpus_hash(generated.corpus)) << "\n";
    return 0;
}

int cmd_index(const RunConfig& config, std::ostream& log) {
    const RunLayout layout = prepare(config);
    require(layout.corpus(), "run `osd gen` first");
    const auto corpus = retrieval::read_corpus_jsonl(layout.corpus());
    const auto index = retrieval::InvertedIndex::build(corpus, config.bm25());
    index.dump(layout.index_dump());
    log << "documents " << index.num_docs() << "\nterms " << index.postings().size() << "\navgdl "
        << index.avg_doc_length() << "\n";
    return 0;
}

int cmd_train_task(const RunConfig& config, std::ostream& log) {
    const RunLayout layout = prepare(config);
    const Workspace ws = open_workspace(config, layout);
    require(layout.task_corpus(), "run `osd gen` first");
    const auto corpus = benchmark::make_task_corpus(ws.vocab, benchmark::read_instances_jsonl(layout.task_corpus()));
    for (auto seed : config.train.seeds) {
        const auto [task, report] = training::train_task(corpus, ws.base, config.task_train_config(seed));
        fs::create_directories(layout.seed_dir(seed));
        save_checkpoint(layout.task_checkpoint(seed), task);
        write_file_atomic(layout.seed_dir(seed) / "task_report.json", report_json(report).dump(1) + "\n");
        log << "seed " << seed << " task final_ce " << report.final_ce << " steps " << report.step_count << "\n";
    }
    return 0;
}

int cmd_train_docs(const RunConfig& config, std::optional<Variant> variant, std::ostream& log) {
    const RunLayout layout = prepare(config);
    const Workspace ws = open_workspace(config, layout);
    std::vector<Variant> variants;
    if (variant) {
        variants.push_back(*variant);
    } else {
        variants.assign(std::begin(kAllVariants), std::end(kAllVariants));
    }
    const auto task_type = config.world.task_type;
    for (auto seed : config.train.seeds) {
        for (Variant v : variants) {
            std::optional<adapters::TaskAdapter> task;
            if (v != Variant::entangled) {
                const fs::path ckpt = layout.task_checkpoint(seed);
                if (!fs::exists(ckpt)) {
                    throw DependencyError("variant " + adapters::to_string(v) + " needs the task adapter " +
                                          ckpt.string() + "; run `osd train-task` first");
                }
                task = load_task_checkpoint(ckpt);
            }
            training::SiteBases bases;
            if (v == Variant::hard) bases = training::precompute_bases(*task, config.train.tau);
            fs::create_directories(layout.knowledge_dir(seed, v));

            std::atomic<std::size_t> trained{0};
            std::atomic<std::size_t> skipped{0};
            const auto base_cfg = config.knowledge_train_config(v, seed);
            parallel_for(ws.world.docs.size(), config.jobs, [&](std::size_t d) {
                const std::string& doc_id = ws.world.docs[d].doc_id;
                const fs::path ckpt = layout.knowledge_checkpoint(seed, v, doc_id);
                if (checkpoint_valid(ckpt, doc_id, v)) {
                    ++skipped;
                    return;
                }
                training::TrainConfig tc = base_cfg;
                tc.seed = training::derive_seed(seed, "doc/" + doc_id);
                const auto examples = benchmark::gen_doc_training(ws.world, d, task_type, tc.seed);
                const auto corpus = benchmark::make_document_corpus(ws.vocab, doc_id, examples);
                const auto [know, report] = training::train_knowledge(corpus, task ? &*task : nullptr, ws.base, tc,
                                                                      v == Variant::hard ? &bases : nullptr);
                json rj = report_json(report);
                rj["doc_id"] = doc_id;
                rj["variant"] = adapters::to_string(v);
                if (task) rj["max_cross_product"] = adapters::max_cross_product(*task, know);
                write_file_atomic(layout.knowledge_dir(seed, v) / (doc_id + ".report.json"), rj.dump(1) + "\n");
                save_checkpoint(ckpt, know);
                ++trained;
            });
            log << "seed " << seed << " variant " << adapters::to_string(v) << " trained " << trained << " skipped "
                << skipped << "\n";
        }
    }
    return 0;
}

int cmd_eval(const RunConfig& config, std::ostream& log) {
    const RunLayout layout = prepare(config);
    const Workspace ws = open_workspace(config, layout);
    require(layout.corpus(), "run `osd gen` first");
    require(layout.instances(), "run `osd gen` first");
    const auto index = retrieval::InvertedIndex::build(retrieval::read_corpus_jsonl(layout.corpus()), config.bm25());
    const auto instances = benchmark::read_instances_jsonl(layout.instances());
    const auto options = config.sweep_options();

    std::vector<Variant> needed;
    for (auto m : options.methods) {
        if (auto v = benchmark::method_variant(m)) needed.push_back(*v);
    }
    const bool needs_task = std::any_of(options.methods.begin(), options.methods.end(), [](benchmark::Method m) {
        return m == benchmark::Method::soft || m == benchmark::Method::hard;
    });

    const std::size_t n = std::min(options.n_eval, instances.size());
    const std::size_t k_max = *std::max_element(options.k_list.begin(), options.k_list.end());
    std::set<std::string> wanted;
    if (!needed.empty()) {
        for (std::size_t i = 0; i < n; ++i) {
            for (const auto& r : benchmark::retrieve_for(index, instances[i], k_max, options.retriever)) {
                wanted.insert(r.doc_id);
            }
        }
    }

    const auto n_seeds = config.train.seeds.size();
    std::vector<std::optional<adapters::TaskAdapter>> tasks(n_seeds);
    std::vector<std::map<Variant, benchmark::AdapterStore>> stores(n_seeds);
    std::vector<benchmark::SeedAdapters> seeds;
    for (std::size_t s = 0; s < n_seeds; ++s) {
        const auto seed = config.train.seeds[s];
        if (needs_task && fs::exists(layout.task_checkpoint(seed))) tasks[s] = load_task_checkpoint(layout.task_checkpoint(seed));
        for (Variant v : needed) {
            auto& store = stores[s][v];
            const std::vector<std::string> ids(wanted.begin(), wanted.end());
            std::vector<std::optional<adapters::KnowledgeAdapter>> loaded(ids.size());
            parallel_for(ids.size(), config.jobs, [&](std::size_t i) {
                const fs::path p = layout.knowledge_checkpoint(seed, v, ids[i]);
                if (fs::exists(p)) loaded[i] = load_knowledge_checkpoint(p);
            });
            for (std::size_t i = 0; i < ids.size(); ++i) {
                if (loaded[i]) store.emplace(ids[i], std::move(*loaded[i]));
            }
        }
    }
    for (std::size_t s = 0; s < n_seeds; ++s) {
        benchmark::SeedAdapters sa;
        sa.seed = config.train.seeds[s];
        sa.task = tasks[s] ? &*tasks[s] : nullptr;
        for (auto& [v, store] : stores[s]) sa.knowledge[v] = &store;
        seeds.push_back(std::move(sa));
    }

    const auto report = benchmark::run_depth_sweep(ws.base, ws.vocab, index, instances, seeds, options);
    fs::create_directories(layout.reports());
    write_file_atomic(layout.reports() / "sweep.csv", benchmark::sweep_csv(report));
    write_file_atomic(layout.reports() / "sweep.json", benchmark::sweep_json(report));

    log << "instances " << report.n_instances << " metric " << report.metric << "\n";
    for (const auto& t : report.trends) {
        log << benchmark::to_string(t.method);
        for (std::size_t i = 0; i < t.seed_mean.size(); ++i) {
            log << " K=" << report.k_list[i] << ":";
            if (t.seed_mean[i]) {
                log << *t.seed_mean[i];
            } else {
                log << "failed";
            }
        }
        log << "\n";
    }
    for (const auto& c : report.cells) {
        if (!c.value) log << "failed cell " << benchmark::to_string(c.method) << " K=" << c.k << " seed=" << c.seed << ": " << c.error << "\n";
    }
    for (const auto& w : report.warnings) log << "warning: " << w << "\n";
    return report.failed_cells() == report.cells.size() ? 1 : 0;
}

int cmd_analyze(const RunConfig& config, std::ostream& log) {
    const RunLayout layout = prepare(config);
    require(layout.instances(), "run `osd gen` first");
    const auto instances = benchmark::read_instances_jsonl(layout.instances());
    analysis::PairSet pairs;
    try {
        pairs = analysis::collect_pairs(instances, config.analysis.n_irrelevant, config.seed);
    } catch (const EmptyRelevantError& e) {
        throw EmptyRelevantError(std::string(e.what()) + " (set world.task_type to qa and world.per_doc >= 3)");
    }
    std::set<std::string> docs;
    for (const auto* list : {&pairs.relevant, &pairs.irrelevant}) {
        for (const auto& [a, b] : *list) {
            docs.insert(a);
            docs.insert(b);
        }
    }
    std::vector<adapters::FlattenKind> kinds;
    for (const auto& k : config.analysis.kinds) kinds.push_back(adapters::parse_flatten_kind(k));

    const auto seed = config.train.seeds.front();
    analysis::SimilarityReport report;
    report.n_relevant = pairs.relevant.size();
    report.n_irrelevant = pairs.irrelevant.size();
    for (const auto& name : config.analysis.variants) {
        const Variant v = adapters::parse_variant(name);
        analysis::AdapterMap adapters;
        for (const auto& id : docs) {
            const fs::path p = layout.knowledge_checkpoint(seed, v, id);
            if (!fs::exists(p)) throw LookupError("no " + name + " adapter for document '" + id + "' at " + p.string());
            adapters.emplace(id, load_knowledge_checkpoint(p));
        }
        auto section = analysis::similarity_report(adapters, pairs, kinds, config.jobs);
        section.variant = name;
        analysis::check_trend(section, v, config.analysis.hard_tolerance);
        for (const auto& k : section.kinds) {
            log << name << " " << adapters::to_string(k.kind) << " relevant_mean " << k.relevant.mean
                << " irrelevant_mean " << k.irrelevant.mean << "\n";
        }
        for (const auto& w : section.warnings) log << "warning: " << name << " " << w << "\n";
        report.variants.push_back(std::move(section));
    }
    fs::create_directories(layout.reports());
    write_file_atomic(layout.reports() / "similarity.csv", analysis::histogram_csv(report));
    write_file_atomic(layout.reports() / "similarity.json", analysis::summary_json(report));
    return 0;
}

}  // namespace osd::cli
