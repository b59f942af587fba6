// Copyright 2026 The OSD Authors
// SPDX-License-Identifier: Apache-2.0

#include "osd/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "osd/error.hpp"
#include "osd/parallel.hpp"

namespace osd::benchmark {

namespace {

using adapters::KnowledgeAdapter;
using adapters::MergeWeights;
using nlohmann::json;

struct InstanceResult {
    std::vector<double> value;  // one per K
    std::vector<std::string> error;
};

std::string format_value(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

InstanceResult eval_instance(const model::BaseWeights& base, const Vocab& vocab, const TaskInstance& inst,
                             const std::vector<retrieval::RetrievalResult>& retrieved, const SeedAdapters& sa,
                             Method method, const SweepOptions& opt) {
    InstanceResult out;
    out.value.assign(opt.k_list.size(), 0.0);
    out.error.assign(opt.k_list.size(), {});
    const auto prompt = prompt_ids(vocab, inst);
    auto decode_score = [&](const adapters::TaskAdapter* task, const adapters::MergedKnowledge* merged) {
        const auto ids = model::greedy_decode(base, task, merged, prompt, opt.max_new_tokens, vocab.eos());
        return score(inst.task_type, vocab.decode(ids), inst.gold);
    };

    if (method == Method::no_adapter) {
        const double v = decode_score(nullptr, nullptr);
        std::fill(out.value.begin(), out.value.end(), v);
        return out;
    }
    const auto variant = *method_variant(method);
    const adapters::TaskAdapter* task = method == Method::entangled ? nullptr : sa.task;
    if (method != Method::entangled && task == nullptr) {
        std::fill(out.error.begin(), out.error.end(), "no task adapter for seed " + std::to_string(sa.seed));
        return out;
    }
    auto store_it = sa.knowledge.find(variant);
    const AdapterStore* store = store_it == sa.knowledge.end() ? nullptr : store_it->second;

    for (std::size_t ki = 0; ki < opt.k_list.size(); ++ki) {
        const std::size_t k = std::min(opt.k_list[ki], retrieved.size());
        std::vector<const KnowledgeAdapter*> picked;
        std::vector<double> scores;
        for (std::size_t j = 0; j < k; ++j) {
            const auto& doc = retrieved[j].doc_id;
            const auto it = store ? store->find(doc) : AdapterStore::const_iterator{};
            if (store == nullptr || it == store->end()) {
                out.error[ki] = "missing " + adapters::to_string(variant) + " adapter for " + doc;
                break;
            }
            picked.push_back(&it->second);
            scores.push_back(retrieved[j].score);
        }
        if (!out.error[ki].empty()) continue;
        if (picked.empty()) {
            out.value[ki] = decode_score(task, nullptr);
            continue;
        }
        const MergeWeights w =
            opt.weight_mode == WeightMode::score ? adapters::score_weights(scores) : adapters::uniform_weights(picked.size());
        const auto merged = adapters::merge(picked, w);
        out.value[ki] = decode_score(task, &merged);
    }
    return out;
}

void compute_trends(DepthSweepReport& r) {
    const std::size_t last = r.k_list.size() - 1;
    for (Method m : r.methods) {
        MethodTrend t;
        t.method = m;
        for (std::size_t k : r.k_list) {
            double sum = 0.0;
            std::size_t n = 0;
            for (auto seed : r.seeds) {
                const SweepCell* c = r.cell(m, k, seed);
                if (c && c->value) {
                    sum += *c->value;
                    ++n;
                }
            }
            t.seed_mean.push_back(n ? std::optional<double>(sum / static_cast<double>(n)) : std::nullopt);
        }
        for (std::size_t i = 0; i < t.seed_mean.size(); ++i) {
            if (t.seed_mean[i] && (!t.best || *t.seed_mean[i] > *t.best)) {
                t.best = t.seed_mean[i];
                t.best_k = r.k_list[i];
            }
        }
        t.last = t.seed_mean[last];
        if (t.best && t.last) t.degradation = *t.best - *t.last;
        r.trends.push_back(std::move(t));
    }

    auto trend_of = [&r](Method m) -> const MethodTrend* {
        for (const auto& t : r.trends) {
            if (t.method == m) return &t;
        }
        return nullptr;
    };
    if (trend_of(Method::no_adapter)) {
        bool flat = true;
        for (auto seed : r.seeds) {
            std::optional<double> first;
            for (std::size_t k : r.k_list) {
                const SweepCell* c = r.cell(Method::no_adapter, k, seed);
                if (!c || !c->value) continue;
                if (!first) first = c->value;
                flat = flat && *c->value == *first;
            }
        }
        r.no_adapter_flat = flat;
        if (!flat) r.warnings.push_back("no_adapter curve varies with K");
    }
    const MethodTrend* ent = trend_of(Method::entangled);
    const MethodTrend* soft = trend_of(Method::soft);
    if (ent && soft && ent->degradation && soft->degradation) {
        r.soft_degrades_less = *soft->degradation < *ent->degradation;
        if (!*r.soft_degrades_less) {
            r.warnings.push_back("trend: soft degradation " + format_value(*soft->degradation) +
                                 " is not below entangled degradation " + format_value(*ent->degradation));
        }
    }
}

}  // namespace

std::string to_string(Method m) {
    switch (m) {
    case Method::no_adapter:
        return "no_adapter";
    case Method::entangled:
        return "entangled";
    case Method::soft:
        return "soft";
    case Method::hard:
        return "hard";
    }
    return "?";
}

std::string to_string(WeightMode m) { return m == WeightMode::uniform ? "uniform" : "score"; }
std::string to_string(RetrieverKind r) { return r == RetrieverKind::bm25 ? "bm25" : "oracle"; }

Method parse_method(std::string_view text) {
    for (Method m : {Method::no_adapter, Method::entangled, Method::soft, Method::hard}) {
        if (to_string(m) == text) return m;
    }
    throw ArgumentError("unknown method '" + std::string(text) + "'");
}

WeightMode parse_weight_mode(std::string_view text) {
    if (text == "uniform") return WeightMode::uniform;
    if (text == "score") return WeightMode::score;
    throw ArgumentError("unknown weight mode '" + std::string(text) + "'");
}

RetrieverKind parse_retriever(std::string_view text) {
    if (text == "bm25") return RetrieverKind::bm25;
    if (text == "oracle") return RetrieverKind::oracle;
    throw ArgumentError("unknown retriever '" + std::string(text) + "'");
}

std::optional<adapters::Variant> method_variant(Method m) {
    switch (m) {
    case Method::no_adapter:
        return std::nullopt;
    case Method::entangled:
        return adapters::Variant::entangled;
    case Method::soft:
        return adapters::Variant::soft;
    case Method::hard:
        return adapters::Variant::hard;
    }
    return std::nullopt;
}

const SweepCell* DepthSweepReport::cell(Method m, std::size_t k, std::uint64_t seed) const {
    for (const auto& c : cells) {
        if (c.method == m && c.k == k && c.seed == seed) return &c;
    }
    return nullptr;
}

std::size_t DepthSweepReport::failed_cells() const {
    return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](const SweepCell& c) { return !c.value; }));
}

std::vector<retrieval::RetrievalResult> retrieve_for(const retrieval::InvertedIndex& index, const TaskInstance& inst,
                                                     std::size_t k, RetrieverKind retriever) {
    if (retriever == RetrieverKind::bm25) return retrieval::top_k(index, inst.input, k);
    const auto ranked = retrieval::top_k(index, inst.input, std::max<std::size_t>(index.num_docs(), 1));
    std::vector<retrieval::RetrievalResult> out;
    for (const auto& src : inst.source_doc_ids) {
        if (out.size() == k) break;
        double s = 0.0;
        for (const auto& r : ranked) {
            if (r.doc_id == src) s = r.score;
        }
        out.push_back({src, s});
    }
    for (const auto& r : ranked) {
        if (out.size() == k) break;
        const bool gold = std::find(inst.source_doc_ids.begin(), inst.source_doc_ids.end(), r.doc_id) !=
                          inst.source_doc_ids.end();
        if (!gold) out.push_back(r);
    }
    return out;
}

DepthSweepReport run_depth_sweep(const model::BaseWeights& base, const Vocab& vocab,
                                 const retrieval::InvertedIndex& index, const std::vector<TaskInstance>& instances,
                                 const std::vector<SeedAdapters>& seeds, const SweepOptions& options) {
    if (options.k_list.empty()) throw ArgumentError("run_depth_sweep: K list is empty");
    if (std::find(options.k_list.begin(), options.k_list.end(), 0) != options.k_list.end()) {
        throw ArgumentError("run_depth_sweep: K must be >= 1");
    }
    if (seeds.empty()) throw ArgumentError("run_depth_sweep: no seeds");
    if (instances.empty()) throw EmptyCorpusError("run_depth_sweep: no instances");

    DepthSweepReport report;
    report.task_type = instances.front().task_type;
    report.metric = metric_name(report.task_type);
    report.k_list = options.k_list;
    report.methods = options.methods;
    report.weight_mode = options.weight_mode;
    report.retriever = options.retriever;
    report.n_instances = std::min(options.n_eval, instances.size());
    for (const auto& s : seeds) report.seeds.push_back(s.seed);

    const std::size_t n = report.n_instances;
    const std::size_t k_max = *std::max_element(options.k_list.begin(), options.k_list.end());
    std::vector<std::vector<retrieval::RetrievalResult>> retrieved(n);
    parallel_for(n, options.jobs, [&](std::size_t i) {
        retrieved[i] = retrieve_for(index, instances[i], k_max, options.retriever);
    });

    for (Method method : options.methods) {
        for (const auto& sa : seeds) {
            std::vector<InstanceResult> results(n);
            parallel_for(n, options.jobs, [&](std::size_t i) {
                results[i] = eval_instance(base, vocab, instances[i], retrieved[i], sa, method, options);
            });
            for (std::size_t ki = 0; ki < options.k_list.size(); ++ki) {
                SweepCell cell{method, options.k_list[ki], sa.seed, std::nullopt, {}};
                double sum = 0.0;
                for (const auto& r : results) {
                    if (!r.error[ki].empty()) {
                        cell.error = r.error[ki];
                        break;
                    }
                    sum += r.value[ki];
                }
                if (cell.error.empty()) cell.value = sum / static_cast<double>(n);
                report.cells.push_back(std::move(cell));
            }
        }
    }
    compute_trends(report);
    return report;
}

std::string sweep_csv(const DepthSweepReport& report) {
    std::ostringstream out;
    out << "method,K,seed,metric,value\n";
    for (const auto& c : report.cells) {
        out << to_string(c.method) << ',' << c.k << ',' << c.seed << ',' << report.metric << ','
            << (c.value ? format_value(*c.value) : "failed") << '\n';
    }
    return out.str();
}

std::string sweep_json(const DepthSweepReport& report) {
    json cells = json::array();
    for (const auto& c : report.cells) {
        json j{{"method", to_string(c.method)}, {"K", c.k}, {"seed", c.seed}};
        if (c.value) {
            j["value"] = *c.value;
        } else {
            j["value"] = nullptr;
            j["error"] = c.error;
        }
        cells.push_back(std::move(j));
    }
    json trends = json::object();
    for (const auto& t : report.trends) {
        json means = json::array();
        for (const auto& m : t.seed_mean) means.push_back(m ? json(*m) : json(nullptr));
        trends[to_string(t.method)] = {{"seed_mean", means},
                                       {"best", t.best ? json(*t.best) : json(nullptr)},
                                       {"best_k", t.best_k ? json(*t.best_k) : json(nullptr)},
                                       {"last", t.last ? json(*t.last) : json(nullptr)},
                                       {"degradation", t.degradation ? json(*t.degradation) : json(nullptr)}};
    }
    json methods = json::array();
    for (Method m : report.methods) methods.push_back(to_string(m));
    const json j{{"task_type", adapters::to_string(report.task_type)},
                 {"metric", report.metric},
                 {"k_list", report.k_list},
                 {"seeds", report.seeds},
                 {"methods", methods},
                 {"weight_mode", to_string(report.weight_mode)},
                 {"retriever", to_string(report.retriever)},
                 {"n_instances", report.n_instances},
                 {"cells", cells},
                 {"trends", trends},
                 {"no_adapter_flat", report.no_adapter_flat ? json(*report.no_adapter_flat) : json(nullptr)},
                 {"soft_degrades_less",
                  report.soft_degrades_less ? json(*report.soft_degrades_less) : json(nullptr)},
                 {"warnings", report.warnings}};
    return j.dump(2) + "\n";
}

}  // namespace osd::benchmark
