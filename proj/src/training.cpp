// Copyright 2026 The OSD Authors
// SPDX-License-Identifier: Apache-2.0

#include "osd/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "osd/error.hpp"

namespace osd::training {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Matrix gaussian(std::size_t rows, std::size_t cols, double stddev, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, stddev);
    Matrix m(rows, cols);
    for (double& x : m.values()) x = normal(rng);
    return m;
}

model::Batch gather(const std::vector<model::Sequence>& examples, const std::vector<std::size_t>& idx) {
    model::Batch b;
    b.rows.reserve(idx.size());
    for (std::size_t i : idx) b.rows.push_back(examples[i]);
    return b;
}

model::Batch whole(const std::vector<model::Sequence>& examples) { return model::Batch{examples}; }

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

TrainConfig TrainConfig::task_defaults() {
    TrainConfig c;
    c.learning_rate = 1e-4;
    c.epochs = 1;
    c.lambda = 0.0;
    return c;
}

std::uint64_t derive_seed(std::uint64_t seed, const std::string& key) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : key) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return splitmix64(seed ^ splitmix64(h));
}

void optimizer_step(std::span<const ParamSlot> params, OptimizerState& state, const TrainConfig& config) {
    for (const auto& p : params) {
        if (p.value->rows() != p.grad->rows() || p.value->cols() != p.grad->cols()) {
            throw ShapeError("optimizer_step: gradient shape mismatch for " + p.name);
        }
        if (!p.grad->all_finite()) throw NumericError("optimizer_step: non-finite gradient at " + p.name, state.step);
    }
    if (config.optimizer == OptimizerKind::sgd) {
        ++state.step;
        for (const auto& p : params) {
            auto w = p.value->values();
            auto g = p.grad->values();
            for (std::size_t i = 0; i < w.size(); ++i) w[i] -= config.learning_rate * g[i];
        }
        return;
    }
    if (state.m.size() != params.size()) {
        state.m.clear();
        state.v.clear();
        for (const auto& p : params) {
            state.m.emplace_back(p.value->rows(), p.value->cols());
            state.v.emplace_back(p.value->rows(), p.value->cols());
        }
        state.step = 0;
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(config.beta1, t);
    const double bc2 = 1.0 - std::pow(config.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto w = params[k].value->values();
        auto g = params[k].grad->values();
        auto m = state.m[k].values();
        auto v = state.v[k].values();
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            w[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.eps);
        }
    }
}

std::vector<std::vector<std::size_t>> epoch_schedule(std::size_t n_examples, int batch_size, std::uint64_t seed,
                                                     int epoch) {
    if (batch_size < 1) throw ArgumentError("batch_size must be >= 1");
    std::vector<std::size_t> order(n_examples);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(derive_seed(seed, "epoch/" + std::to_string(epoch)));
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<std::size_t>> steps;
    const auto bs = static_cast<std::size_t>(batch_size);
    for (std::size_t start = 0; start < n_examples; start += bs) {
        steps.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                           order.begin() + static_cast<std::ptrdiff_t>(std::min(start + bs, n_examples)));
    }
    return steps;
}

TaskAdapter init_task_adapter(const model::ModelConfig& cfg, TaskType type, const TrainConfig& config) {
    std::mt19937_64 rng(derive_seed(config.seed, "task-init"));
    TaskAdapter t;
    t.task_type = type;
    t.rank = config.rank;
    for (const auto& site : model::adapted_sites(cfg)) {
        const auto shape = model::site_shape(cfg, site);
        t.layers.push_back({site, gaussian(config.rank, shape.d_in, config.init_std, rng), Matrix(shape.d_out, config.rank)});
    }
    return t;
}

KnowledgeAdapter init_knowledge_adapter(const model::ModelConfig& cfg, const std::string& doc_id,
                                        const TrainConfig& config, const SiteBases* bases) {
    std::mt19937_64 rng(derive_seed(config.seed, "knowledge-init"));
    KnowledgeAdapter k;
    k.doc_id = doc_id;
    k.variant = config.variant;
    k.rank = config.rank;
    const auto sites = model::adapted_sites(cfg);
    if (config.variant == Variant::hard) {
        if (!bases || bases->size() != sites.size()) {
            throw StructuralError("hard adapter '" + doc_id + "' needs one null-space basis per site");
        }
        k.tau = config.tau;
        k.bases = *bases;
    }
    for (std::size_t i = 0; i < sites.size(); ++i) {
        const auto shape = model::site_shape(cfg, sites[i]);
        adapters::LoraLayer layer{sites[i], Matrix(config.rank, shape.d_in), Matrix(shape.d_out, config.rank)};
        if (config.variant == Variant::hard) {
            const auto& basis = *k.bases[i];
            if (basis.input_dim() != shape.d_in) {
                throw ShapeError("basis for " + sites[i].str() + " has dim " + std::to_string(basis.input_dim()));
            }
            k.a_hat.push_back(gaussian(config.rank, basis.v_perp.cols(), config.init_std, rng));
        } else {
            layer.a = gaussian(config.rank, shape.d_in, config.init_std, rng);
        }
        k.layers.push_back(std::move(layer));
    }
    k.sync_hard();
    return k;
}

std::pair<TaskAdapter, TrainReport> train_task(const TaskCorpus& corpus, const model::BaseWeights& base,
                                               const TrainConfig& config) {
    if (corpus.examples.empty()) throw EmptyCorpusError("train_task: empty task corpus");
    const auto t0 = std::chrono::steady_clock::now();
    TaskAdapter task = init_task_adapter(base.config, corpus.task_type, config);
    TrainReport report;
    OptimizerState state;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        for (const auto& idx : epoch_schedule(corpus.examples.size(), config.batch_size, config.seed, epoch)) {
            const model::LoraGrads grads = model::backward_task(base, task, gather(corpus.examples, idx));
            std::vector<ParamSlot> slots;
            for (std::size_t i = 0; i < task.layers.size(); ++i) {
                const std::string site = task.layers[i].site.str();
                slots.push_back({"task " + site + ".a", &task.layers[i].a, &grads.a[i]});
                slots.push_back({"task " + site + ".b", &task.layers[i].b, &grads.b[i]});
            }
            optimizer_step(slots, state, config);
            report.steps.push_back({grads.loss, grads.loss, 0.0});
        }
    }
    report.step_count = report.steps.size();
    report.final_ce = model::loss_ce(model::forward(base, &task, nullptr, whole(corpus.examples)),
                                     whole(corpus.examples));
    report.wall_seconds = seconds_since(t0);
    return {std::move(task), std::move(report)};
}

SiteBases precompute_bases(const TaskAdapter& task, double tau) {
    SiteBases out;
    out.reserve(task.layers.size());
    for (const auto& l : task.layers) {
        try {
            out.push_back(std::make_shared<const NullSpaceBasis>(linalg::null_space_basis(l.a, tau)));
        } catch (const DegenerateBasisError& e) {
            throw DegenerateBasisError("site " + l.site.str() + ": " + e.what());
        }
    }
    return out;
}

std::pair<KnowledgeAdapter, TrainReport> train_knowledge(const DocumentCorpus& doc, const TaskAdapter* task,
                                                         const model::BaseWeights& base, const TrainConfig& config,
                                                         const SiteBases* bases) {
    if (doc.examples.empty()) throw EmptyCorpusError("train_knowledge: document '" + doc.doc_id + "' has no examples");
    if (config.variant != Variant::entangled && task == nullptr) {
        throw DependencyError("train_knowledge: variant " + adapters::to_string(config.variant) +
                              " needs a trained task adapter");
    }
    const auto t0 = std::chrono::steady_clock::now();
    // The entangled baseline trains without the task adapter loaded.
    const TaskAdapter* loaded = config.variant == Variant::entangled ? nullptr : task;

    SiteBases computed;
    if (config.variant == Variant::hard && bases == nullptr) {
        computed = precompute_bases(*task, config.tau);
        bases = &computed;
    }
    KnowledgeAdapter know = init_knowledge_adapter(base.config, doc.doc_id, config, bases);
    const bool penalised = config.variant == Variant::soft && config.lambda != 0.0;

    TrainReport report;
    OptimizerState state;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        for (const auto& idx : epoch_schedule(doc.examples.size(), config.batch_size, config.seed, epoch)) {
            model::LoraGrads grads = model::backward_lora(base, loaded, know, gather(doc.examples, idx));
            StepRecord rec;
            rec.ce = grads.loss;
            rec.ortho = task ? adapters::overlap_penalty(*task, know) : 0.0;
            rec.total = rec.ce;
            if (penalised) {
                rec.total = rec.ce + config.lambda * rec.ortho;
                const auto pg = adapters::overlap_penalty_grad(*task, know);
                for (std::size_t i = 0; i < pg.size(); ++i) {
                    auto g = grads.a[i].values();
                    auto p = pg[i].values();
                    for (std::size_t e = 0; e < g.size(); ++e) g[e] += config.lambda * p[e];
                }
            }
            std::vector<ParamSlot> slots;
            for (std::size_t i = 0; i < know.layers.size(); ++i) {
                const std::string site = doc.doc_id + " " + know.layers[i].site.str();
                if (know.variant == Variant::hard) {
                    slots.push_back({site + ".a_hat", &know.a_hat[i], &grads.a[i]});
                } else {
                    slots.push_back({site + ".a", &know.layers[i].a, &grads.a[i]});
                }
                slots.push_back({site + ".b", &know.layers[i].b, &grads.b[i]});
            }
            optimizer_step(slots, state, config);
            know.sync_hard();
            report.steps.push_back(rec);
        }
    }
    report.step_count = report.steps.size();
    report.final_ce = model::loss_with_knowledge(base, loaded, know, whole(doc.examples));
    if (task) report.final_ortho = adapters::overlap_penalty(*task, know);
    report.wall_seconds = seconds_since(t0);
    return {std::move(know), std::move(report)};
}

}  // namespace osd::training
