// Copyright 2026 The OSD Authors
// SPDX-License-Identifier: Apache-2.0

#include "osd/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "osd/error.hpp"

namespace osd::cli {

namespace {

using nlohmann::json;

class Section {
public:
    Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
        if (!j_.is_object()) throw ConfigError("config section '" + name_ + "' must be an object");
    }

    template <class T>
    void get(const std::string& key, T& field) {
        if (!j_.contains(key)) return;
        used_.insert(key);
        try {
            field = j_.at(key).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError("config key '" + path(key) + "': " + e.what());
        }
    }

    const json* sub(const std::string& key) {
        if (!j_.contains(key)) return nullptr;
        used_.insert(key);
        return &j_.at(key);
    }

    void done() const {
        for (const auto& item : j_.items()) {
            if (!used_.count(item.key())) throw ConfigError("unknown config key '" + path(item.key()) + "'");
        }
    }

    std::string path(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

private:
    const json& j_;
    std::string name_;
    std::set<std::string> used_;
};

template <class T>
void check(bool ok, const std::string& key, const T& value) {
    if (!ok) {
        std::ostringstream ss;
        ss << "config value out of range: " << key << " = " << value;
        throw ConfigError(ss.str());
    }
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    RunConfig c;
    Section top(root, "");
    top.get("seed", c.seed);
    top.get("out", c.out);
    top.get("jobs", c.jobs);
    if (const json* j = top.sub("world")) {
        Section s(*j, "world");
        s.get("n_entities", c.world.n_entities);
        s.get("n_relations", c.world.n_relations);
        s.get("n_docs", c.world.n_docs);
        s.get("per_doc", c.world.per_doc);
        s.get("multi_hop_every", c.world.multi_hop_every);
        std::string task = adapters::to_string(c.world.task_type);
        s.get("task_type", task);
        try {
            c.world.task_type = adapters::parse_task_type(task);
        } catch (const Error& e) {
            throw ConfigError(std::string("world.task_type: ") + e.what());
        }
        s.done();
    }
    if (const json* j = top.sub("model")) {
        Section s(*j, "model");
        s.get("d_model", c.model.d_model);
        s.get("n_layers", c.model.n_layers);
        s.get("n_heads", c.model.n_heads);
        s.get("d_ff", c.model.d_ff);
        s.get("max_seq", c.model.max_seq);
        s.get("init_std", c.model.init_std);
        s.get("head_std", c.model.head_std);
        s.done();
    }
    if (const json* j = top.sub("train")) {
        Section s(*j, "train");
        s.get("task_lr", c.train.task_lr);
        s.get("task_epochs", c.train.task_epochs);
        s.get("task_batch_size", c.train.task_batch_size);
        s.get("task_rank", c.train.task_rank);
        s.get("knowledge_lr", c.train.knowledge_lr);
        s.get("knowledge_epochs", c.train.knowledge_epochs);
        s.get("knowledge_batch_size", c.train.knowledge_batch_size);
        s.get("knowledge_rank", c.train.knowledge_rank);
        s.get("lambda", c.train.lambda);
        s.get("tau", c.train.tau);
        s.get("init_std", c.train.init_std);
        s.get("seeds", c.train.seeds);
        s.done();
    }
    if (const json* j = top.sub("retrieval")) {
        Section s(*j, "retrieval");
        s.get("k1", c.retrieval.k1);
        s.get("b", c.retrieval.b);
        s.done();
    }
    if (const json* j = top.sub("sweep")) {
        Section s(*j, "sweep");
        s.get("k_list", c.sweep.k_list);
        s.get("methods", c.sweep.methods);
        s.get("weight_mode", c.sweep.weight_mode);
        s.get("retriever", c.sweep.retriever);
        s.get("n_eval", c.sweep.n_eval);
        s.get("max_new_tokens", c.sweep.max_new_tokens);
        s.done();
    }
    if (const json* j = top.sub("analysis")) {
        Section s(*j, "analysis");
        s.get("n_irrelevant", c.analysis.n_irrelevant);
        s.get("kinds", c.analysis.kinds);
        s.get("variants", c.analysis.variants);
        s.get("hard_tolerance", c.analysis.hard_tolerance);
        s.done();
    }
    top.done();
    c.validate();
    return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

std::string RunConfig::to_json_text() const {
    const json j{
        {"seed", seed},
        {"out", out},
        {"jobs", jobs},
        {"world",
         {{"n_entities", world.n_entities},
          {"n_relations", world.n_relations},
          {"n_docs", world.n_docs},
          {"per_doc", world.per_doc},
          {"multi_hop_every", world.multi_hop_every},
          {"task_type", adapters::to_string(world.task_type)}}},
        {"model",
         {{"d_model", model.d_model},
          {"n_layers", model.n_layers},
          {"n_heads", model.n_heads},
          {"d_ff", model.d_ff},
          {"max_seq", model.max_seq},
          {"init_std", model.init_std},
          {"head_std", model.head_std}}},
        {"train",
         {{"task_lr", train.task_lr},
          {"task_epochs", train.task_epochs},
          {"task_batch_size", train.task_batch_size},
          {"task_rank", train.task_rank},
          {"knowledge_lr", train.knowledge_lr},
          {"knowledge_epochs", train.knowledge_epochs},
          {"knowledge_batch_size", train.knowledge_batch_size},
          {"knowledge_rank", train.knowledge_rank},
          {"lambda", train.lambda},
          {"tau", train.tau},
          {"init_std", train.init_std},
          {"seeds", train.seeds}}},
        {"retrieval", {{"k1", retrieval.k1}, {"b", retrieval.b}}},
        {"sweep",
         {{"k_list", sweep.k_list},
          {"methods", sweep.methods},
          {"weight_mode", sweep.weight_mode},
          {"retriever", sweep.retriever},
          {"n_eval", sweep.n_eval},
          {"max_new_tokens", sweep.max_new_tokens}}},
        {"analysis",
         {{"n_irrelevant", analysis.n_irrelevant},
          {"kinds", analysis.kinds},
          {"variants", analysis.variants},
          {"hard_tolerance", analysis.hard_tolerance}}},
    };
    return j.dump(2) + "\n";
}

void RunConfig::validate() const {
    check(jobs >= 1, "jobs", jobs);
    check(world.n_entities >= 1, "world.n_entities", world.n_entities);
    check(world.n_relations >= 1, "world.n_relations", world.n_relations);
    check(world.n_docs >= 1, "world.n_docs", world.n_docs);
    check(world.per_doc >= 1, "world.per_doc", world.per_doc);
    check(model.d_model >= 1 && model.n_heads >= 1 && model.d_model % model.n_heads == 0, "model.d_model", model.d_model);
    check(model.n_layers >= 1, "model.n_layers", model.n_layers);
    check(model.d_ff >= 1, "model.d_ff", model.d_ff);
    check(model.max_seq >= 2, "model.max_seq", model.max_seq);
    check(model.init_std > 0.0, "model.init_std", model.init_std);
    check(model.head_std > 0.0, "model.head_std", model.head_std);
    check(train.task_lr > 0.0, "train.task_lr", train.task_lr);
    check(train.knowledge_lr > 0.0, "train.knowledge_lr", train.knowledge_lr);
    check(train.task_epochs >= 1, "train.task_epochs", train.task_epochs);
    check(train.knowledge_epochs >= 1, "train.knowledge_epochs", train.knowledge_epochs);
    check(train.task_batch_size >= 1, "train.task_batch_size", train.task_batch_size);
    check(train.knowledge_batch_size >= 1, "train.knowledge_batch_size", train.knowledge_batch_size);
    check(train.task_rank >= 1, "train.task_rank", train.task_rank);
    check(train.knowledge_rank >= 1, "train.knowledge_rank", train.knowledge_rank);
    check(train.lambda >= 0.0, "train.lambda", train.lambda);
    check(train.tau > 0.0, "train.tau", train.tau);
    check(!train.seeds.empty(), "train.seeds", "[]");
    check(retrieval.k1 >= 0.0, "retrieval.k1", retrieval.k1);
    check(retrieval.b >= 0.0 && retrieval.b <= 1.0, "retrieval.b", retrieval.b);
    check(!sweep.k_list.empty(), "sweep.k_list", "[]");
    for (auto k : sweep.k_list) check(k >= 1, "sweep.k_list", k);
    check(sweep.n_eval >= 1, "sweep.n_eval", sweep.n_eval);
    check(sweep.max_new_tokens >= 0, "sweep.max_new_tokens", sweep.max_new_tokens);
    check(analysis.hard_tolerance > 0.0, "analysis.hard_tolerance", analysis.hard_tolerance);
    try {
        for (const auto& m : sweep.methods) benchmark::parse_method(m);
        benchmark::parse_weight_mode(sweep.weight_mode);
        benchmark::parse_retriever(sweep.retriever);
        for (const auto& k : analysis.kinds) adapters::parse_flatten_kind(k);
        for (const auto& v : analysis.variants) adapters::parse_variant(v);
    } catch (const ArgumentError& e) {
        throw ConfigError(e.what());
    }
}

model::ModelConfig RunConfig::model_config(int vocab_size) const {
    model::ModelConfig m;
    m.vocab_size = vocab_size;
    m.d_model = model.d_model;
    m.n_layers = model.n_layers;
    m.n_heads = model.n_heads;
    m.d_ff = model.d_ff;
    m.max_seq = model.max_seq;
    m.init_std = model.init_std;
    m.head_std = model.head_std;
    m.seed = training::derive_seed(seed, "base");
    return m;
}

training::TrainConfig RunConfig::task_train_config(std::uint64_t train_seed) const {
    training::TrainConfig t = training::TrainConfig::task_defaults();
    t.learning_rate = train.task_lr;
    t.epochs = train.task_epochs;
    t.batch_size = train.task_batch_size;
    t.rank = train.task_rank;
    t.init_std = train.init_std;
    t.seed = training::derive_seed(train_seed, "task");
    return t;
}

training::TrainConfig RunConfig::knowledge_train_config(adapters::Variant variant, std::uint64_t train_seed) const {
    training::TrainConfig t;
    t.learning_rate = train.knowledge_lr;
    t.epochs = train.knowledge_epochs;
    t.batch_size = train.knowledge_batch_size;
    t.rank = train.knowledge_rank;
    t.lambda = variant == adapters::Variant::soft ? train.lambda : 0.0;
    t.tau = train.tau;
    t.init_std = train.init_std;
    t.variant = variant;
    t.seed = train_seed;
    return t;
}

benchmark::SweepOptions RunConfig::sweep_options() const {
    benchmark::SweepOptions o;
    o.k_list = sweep.k_list;
    o.methods.clear();
    for (const auto& m : sweep.methods) o.methods.push_back(benchmark::parse_method(m));
    o.weight_mode = benchmark::parse_weight_mode(sweep.weight_mode);
    o.retriever = benchmark::parse_retriever(sweep.retriever);
    o.n_eval = sweep.n_eval;
    o.max_new_tokens = sweep.max_new_tokens;
    o.jobs = jobs;
    return o;
}

}  // namespace osd::cli
