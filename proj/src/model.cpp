// Copyright 2026 The OSD Authors
// SPDX-License-Identifier: Apache-2.0

#include "osd/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "osd/error.hpp"

namespace osd::model {

using linalg::matmul;
using linalg::matmul_nt;
using linalg::matmul_tn;

namespace {

constexpr double kLnEps = 1e-5;

std::size_t site_index(const SiteId& s) {
    return static_cast<std::size_t>(s.layer) * 2 + (s.kind == adapters::SiteKind::mlp_down ? 1 : 0);
}

// Additive terms active at one adapted site.
struct SiteTerms {
    const LoraLayer* task = nullptr;
    const Matrix* merged = nullptr;
    const LoraLayer* train = nullptr;
};

using Stack = std::vector<SiteTerms>;

void check_layer_shape(const ModelConfig& cfg, const LoraLayer& l, const char* what) {
    l.validate();
    const SiteShape shape = site_shape(cfg, l.site);
    if (l.a.cols() != shape.d_in || l.b.rows() != shape.d_out) {
        throw StructuralError(std::string(what) + " layer " + l.site.str() + " has shape a=" +
                              std::to_string(l.a.rows()) + "x" + std::to_string(l.a.cols()) +
                              " b=" + std::to_string(l.b.rows()) + "x" + std::to_string(l.b.cols()) +
                              ", site expects d_in=" + std::to_string(shape.d_in) +
                              " d_out=" + std::to_string(shape.d_out));
    }
}

template <typename Layers>
void check_site_set(const ModelConfig& cfg, const Layers& layers, const char* what) {
    const auto sites = adapted_sites(cfg);
    if (layers.size() != sites.size()) {
        throw StructuralError(std::string(what) + " covers " + std::to_string(layers.size()) + " sites, model has " +
                              std::to_string(sites.size()));
    }
    for (std::size_t i = 0; i < sites.size(); ++i) {
        if (layers[i].site != sites[i]) {
            throw StructuralError(std::string(what) + " site " + std::to_string(i) + " is " + layers[i].site.str() +
                                  ", expected " + sites[i].str());
        }
    }
}

Stack make_stack(const ModelConfig& cfg, const TaskAdapter* task, const MergedKnowledge* merged,
                 const std::vector<LoraLayer>* train) {
    Stack stack(adapted_sites(cfg).size());
    if (task) {
        check_site_set(cfg, task->layers, "task adapter");
        for (const auto& l : task->layers) {
            check_layer_shape(cfg, l, "task adapter");
            stack[site_index(l.site)].task = &l;
        }
    }
    if (merged) {
        check_site_set(cfg, merged->sites, "merged knowledge");
        for (const auto& s : merged->sites) {
            const SiteShape shape = site_shape(cfg, s.site);
            if (s.delta.rows() != shape.d_out || s.delta.cols() != shape.d_in) {
                throw StructuralError("merged delta at " + s.site.str() + " has wrong shape");
            }
            stack[site_index(s.site)].merged = &s.delta;
        }
    }
    if (train) {
        check_site_set(cfg, *train, "knowledge adapter");
        for (const auto& l : *train) {
            check_layer_shape(cfg, l, "knowledge adapter");
            stack[site_index(l.site)].train = &l;
        }
    }
    return stack;
}

struct LnCache {
    Matrix xhat;
    std::vector<double> rstd;
};

Matrix layer_norm(const Matrix& x, const std::vector<double>& gain, const std::vector<double>& bias, LnCache* cache) {
    const std::size_t n = x.cols();
    Matrix y(x.rows(), n);
    if (cache) {
        cache->xhat = Matrix(x.rows(), n);
        cache->rstd.assign(x.rows(), 0.0);
    }
    for (std::size_t t = 0; t < x.rows(); ++t) {
        auto xr = x.row(t);
        double mean = 0.0;
        for (double v : xr) mean += v;
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (double v : xr) var += (v - mean) * (v - mean);
        var /= static_cast<double>(n);
        const double rstd = 1.0 / std::sqrt(var + kLnEps);
        auto yr = y.row(t);
        for (std::size_t c = 0; c < n; ++c) {
            const double xh = (xr[c] - mean) * rstd;
            yr[c] = xh * gain[c] + bias[c];
            if (cache) cache->xhat(t, c) = xh;
        }
        if (cache) cache->rstd[t] = rstd;
    }
    return y;
}

Matrix layer_norm_backward(const Matrix& dy, const std::vector<double>& gain, const LnCache& cache) {
    const std::size_t n = dy.cols();
    Matrix dx(dy.rows(), n);
    std::vector<double> dxhat(n);
    for (std::size_t t = 0; t < dy.rows(); ++t) {
        double mean_d = 0.0;
        double mean_dx = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
            dxhat[c] = dy(t, c) * gain[c];
            mean_d += dxhat[c];
            mean_dx += dxhat[c] * cache.xhat(t, c);
        }
        mean_d /= static_cast<double>(n);
        mean_dx /= static_cast<double>(n);
        for (std::size_t c = 0; c < n; ++c) {
            dx(t, c) = cache.rstd[t] * (dxhat[c] - mean_d - cache.xhat(t, c) * mean_dx);
        }
    }
    return dx;
}

double gelu(double u) { return 0.5 * u * (1.0 + std::erf(u / std::numbers::sqrt2)); }

double gelu_grad(double u) {
    const double pdf = std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi);
    return 0.5 * (1.0 + std::erf(u / std::numbers::sqrt2)) + u * pdf;
}

void add_into(Matrix& dst, const Matrix& src) {
    auto d = dst.values();
    auto s = src.values();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

Matrix apply_site(const Matrix& x, const Matrix& w0, const SiteTerms& terms, Matrix* train_xa) {
    Matrix y = matmul_nt(x, w0);
    if (terms.task) add_into(y, matmul_nt(matmul_nt(x, terms.task->a), terms.task->b));
    if (terms.merged) add_into(y, matmul_nt(x, *terms.merged));
    if (terms.train) {
        Matrix xa = matmul_nt(x, terms.train->a);
        add_into(y, matmul_nt(xa, terms.train->b));
        if (train_xa) *train_xa = std::move(xa);
    }
    return y;
}

// Returns dL/dx and accumulates into the trainable term's gradients.
Matrix apply_site_backward(const Matrix& dy, const Matrix& x, const Matrix& w0, const SiteTerms& terms,
                           const Matrix& train_xa, Matrix* grad_a, Matrix* grad_b) {
    Matrix dx = matmul(dy, w0);
    if (terms.task) add_into(dx, matmul(matmul(dy, terms.task->b), terms.task->a));
    if (terms.merged) add_into(dx, matmul(dy, *terms.merged));
    if (terms.train) {
        const Matrix g = matmul(dy, terms.train->b);  // T x r
        add_into(dx, matmul(g, terms.train->a));
        add_into(*grad_b, matmul_tn(dy, train_xa));
        add_into(*grad_a, matmul_tn(g, x));
    }
    return dx;
}

struct BlockCache {
    LnCache ln1;
    Matrix xn1, q, k, v;
    std::vector<Matrix> probs;  // per head, T x T, lower triangular
    Matrix attn_cat;
    LnCache ln2;
    Matrix xn2, up_pre, up_xa, act, down_xa;
};

struct SeqCache {
    std::vector<BlockCache> blocks;
    LnCache final_ln;
};

class Runner {
public:
    Runner(const BaseWeights& base, const Stack& stack) : base_(base), cfg_(base.config), stack_(stack) {}

    // Final normalised hidden states, T x d_model.
    Matrix hidden(const std::vector<int>& tokens, SeqCache* cache) const {
        const std::size_t seq = tokens.size();
        if (seq == 0) throw ArgumentError("forward: empty sequence");
        if (seq > static_cast<std::size_t>(cfg_.max_seq)) {
            throw ArgumentError("forward: sequence length " + std::to_string(seq) + " exceeds max_seq " +
                                std::to_string(cfg_.max_seq));
        }
        const std::size_t d = static_cast<std::size_t>(cfg_.d_model);
        Matrix x(seq, d);
        for (std::size_t t = 0; t < seq; ++t) {
            const int id = tokens[t];
            if (id < 0 || id >= cfg_.vocab_size) {
                throw ArgumentError("forward: token id " + std::to_string(id) + " outside vocabulary");
            }
            auto e = base_.token_embedding.row(static_cast<std::size_t>(id));
            auto p = base_.position_embedding.row(t);
            auto xr = x.row(t);
            for (std::size_t c = 0; c < d; ++c) xr[c] = e[c] + p[c];
        }
        if (cache) cache->blocks.assign(base_.blocks.size(), BlockCache{});
        for (std::size_t l = 0; l < base_.blocks.size(); ++l) {
            BlockCache local;
            BlockCache& bc = cache ? cache->blocks[l] : local;
            const BlockWeights& w = base_.blocks[l];

            bc.xn1 = layer_norm(x, w.ln1_gain, w.ln1_bias, &bc.ln1);
            bc.q = matmul_nt(bc.xn1, w.wq);
            bc.k = matmul_nt(bc.xn1, w.wk);
            bc.v = matmul_nt(bc.xn1, w.wv);
            attention(bc);
            add_into(x, matmul_nt(bc.attn_cat, w.wo));

            bc.xn2 = layer_norm(x, w.ln2_gain, w.ln2_bias, &bc.ln2);
            const SiteTerms& up = stack_[2 * l];
            const SiteTerms& down = stack_[2 * l + 1];
            bc.up_pre = apply_site(bc.xn2, w.mlp_up, up, &bc.up_xa);
            bc.act = Matrix(bc.up_pre.rows(), bc.up_pre.cols());
            for (std::size_t i = 0; i < bc.act.size(); ++i) bc.act.values()[i] = gelu(bc.up_pre.values()[i]);
            add_into(x, apply_site(bc.act, w.mlp_down, down, &bc.down_xa));
        }
        LnCache local_final;
        return layer_norm(x, base_.final_gain, base_.final_bias, cache ? &cache->final_ln : &local_final);
    }

    // Backpropagates dL/dhidden to the trainable low-rank terms.
    void backward(const Matrix& d_hidden, const SeqCache& cache, LoraGrads& grads) const {
        Matrix dx = layer_norm_backward(d_hidden, base_.final_gain, cache.final_ln);
        for (std::size_t l = base_.blocks.size(); l-- > 0;) {
            const BlockWeights& w = base_.blocks[l];
            const BlockCache& bc = cache.blocks[l];
            const SiteTerms& up = stack_[2 * l];
            const SiteTerms& down = stack_[2 * l + 1];

            Matrix d_act = apply_site_backward(dx, bc.act, w.mlp_down, down, bc.down_xa, &grads.a[2 * l + 1],
                                               &grads.b[2 * l + 1]);
            for (std::size_t i = 0; i < d_act.size(); ++i) d_act.values()[i] *= gelu_grad(bc.up_pre.values()[i]);
            const Matrix d_xn2 =
                apply_site_backward(d_act, bc.xn2, w.mlp_up, up, bc.up_xa, &grads.a[2 * l], &grads.b[2 * l]);
            add_into(dx, layer_norm_backward(d_xn2, w.ln2_gain, bc.ln2));

            if (l == 0) break;  // nothing trainable below the first MLP
            const Matrix d_cat = matmul(dx, w.wo);
            Matrix dq, dk, dv;
            attention_backward(bc, d_cat, dq, dk, dv);
            Matrix d_xn1 = matmul(dq, w.wq);
            add_into(d_xn1, matmul(dk, w.wk));
            add_into(d_xn1, matmul(dv, w.wv));
            add_into(dx, layer_norm_backward(d_xn1, w.ln1_gain, bc.ln1));
        }
    }

private:
    void attention(BlockCache& bc) const {
        const std::size_t seq = bc.q.rows();
        const std::size_t heads = static_cast<std::size_t>(cfg_.n_heads);
        const std::size_t hd = static_cast<std::size_t>(cfg_.d_model) / heads;
        const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
        bc.attn_cat = Matrix(seq, static_cast<std::size_t>(cfg_.d_model));
        bc.probs.assign(heads, Matrix(seq, seq));
        for (std::size_t h = 0; h < heads; ++h) {
            const std::size_t off = h * hd;
            Matrix& p = bc.probs[h];
            for (std::size_t i = 0; i < seq; ++i) {
                const double* qi = bc.q.row(i).data() + off;
                double mx = -std::numeric_limits<double>::infinity();
                for (std::size_t j = 0; j <= i; ++j) {
                    const double* kj = bc.k.row(j).data() + off;
                    double s = 0.0;
                    for (std::size_t c = 0; c < hd; ++c) s += qi[c] * kj[c];
                    p(i, j) = s * scale;
                    mx = std::max(mx, p(i, j));
                }
                double z = 0.0;
                for (std::size_t j = 0; j <= i; ++j) {
                    p(i, j) = std::exp(p(i, j) - mx);
                    z += p(i, j);
                }
                double* out = bc.attn_cat.row(i).data() + off;
                for (std::size_t j = 0; j <= i; ++j) {
                    p(i, j) /= z;
                    const double* vj = bc.v.row(j).data() + off;
                    for (std::size_t c = 0; c < hd; ++c) out[c] += p(i, j) * vj[c];
                }
            }
        }
    }

    void attention_backward(const BlockCache& bc, const Matrix& d_cat, Matrix& dq, Matrix& dk, Matrix& dv) const {
        const std::size_t seq = bc.q.rows();
        const std::size_t heads = static_cast<std::size_t>(cfg_.n_heads);
        const std::size_t hd = static_cast<std::size_t>(cfg_.d_model) / heads;
        const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
        dq = Matrix(seq, bc.q.cols());
        dk = Matrix(seq, bc.k.cols());
        dv = Matrix(seq, bc.v.cols());
        std::vector<double> dp(seq);
        for (std::size_t h = 0; h < heads; ++h) {
            const std::size_t off = h * hd;
            const Matrix& p = bc.probs[h];
            for (std::size_t i = 0; i < seq; ++i) {
                const double* doi = d_cat.row(i).data() + off;
                double weighted = 0.0;
                for (std::size_t j = 0; j <= i; ++j) {
                    const double* vj = bc.v.row(j).data() + off;
                    double s = 0.0;
                    for (std::size_t c = 0; c < hd; ++c) s += doi[c] * vj[c];
                    dp[j] = s;
                    weighted += p(i, j) * s;
                    double* dvj = dv.row(j).data() + off;
                    for (std::size_t c = 0; c < hd; ++c) dvj[c] += p(i, j) * doi[c];
                }
                const double* qi = bc.q.row(i).data() + off;
                double* dqi = dq.row(i).data() + off;
                for (std::size_t j = 0; j <= i; ++j) {
                    const double ds = p(i, j) * (dp[j] - weighted) * scale;
                    if (ds == 0.0) continue;
                    const double* kj = bc.k.row(j).data() + off;
                    double* dkj = dk.row(j).data() + off;
                    for (std::size_t c = 0; c < hd; ++c) {
                        dqi[c] += ds * kj[c];
                        dkj[c] += ds * qi[c];
                    }
                }
            }
        }
    }

    const BaseWeights& base_;
    const ModelConfig& cfg_;
    const Stack& stack_;
};

void check_sequence(const Sequence& s) {
    if (s.targets.size() != s.tokens.size() || s.loss_mask.size() != s.tokens.size()) {
        throw ShapeError("sequence: tokens/targets/loss_mask lengths differ");
    }
}

std::size_t masked_count(const Batch& batch) {
    std::size_t n = 0;
    for (const auto& s : batch.rows) {
        check_sequence(s);
        n += static_cast<std::size_t>(std::count(s.loss_mask.begin(), s.loss_mask.end(), true));
    }
    return n;
}

// Runs forward + backward for the trainable `train` layers; returns the loss.
LoraGrads run_backward(const BaseWeights& base, const Stack& stack, const std::vector<LoraLayer>& train,
                       const Batch& batch) {
    const std::size_t n_masked = masked_count(batch);
    if (n_masked == 0) throw EmptyLossError("backward: loss mask selects no positions");
    LoraGrads grads;
    for (const auto& l : train) {
        grads.a.emplace_back(l.a.rows(), l.a.cols());
        grads.b.emplace_back(l.b.rows(), l.b.cols());
    }
    const Runner runner(base, stack);
    const std::size_t vocab = static_cast<std::size_t>(base.config.vocab_size);
    const double inv_n = 1.0 / static_cast<double>(n_masked);
    double loss = 0.0;
    std::vector<double> logits(vocab);
    for (const auto& s : batch.rows) {
        SeqCache cache;
        const Matrix z = runner.hidden(s.tokens, &cache);
        Matrix dz(z.rows(), z.cols());
        for (std::size_t t = 0; t < s.tokens.size(); ++t) {
            if (!s.loss_mask[t]) continue;
            auto zr = z.row(t);
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t v = 0; v < vocab; ++v) {
                double acc = 0.0;
                auto hr = base.head.row(v);
                for (std::size_t c = 0; c < zr.size(); ++c) acc += zr[c] * hr[c];
                logits[v] = acc;
                mx = std::max(mx, acc);
            }
            double sum = 0.0;
            for (std::size_t v = 0; v < vocab; ++v) sum += std::exp(logits[v] - mx);
            const double lse = mx + std::log(sum);
            const auto target = static_cast<std::size_t>(s.targets[t]);
            loss += (lse - logits[target]) * inv_n;
            auto dzr = dz.row(t);
            for (std::size_t v = 0; v < vocab; ++v) {
                double g = std::exp(logits[v] - lse);
                if (v == target) g -= 1.0;
                g *= inv_n;
                auto hr = base.head.row(v);
                for (std::size_t c = 0; c < dzr.size(); ++c) dzr[c] += g * hr[c];
            }
        }
        runner.backward(dz, cache, grads);
    }
    grads.loss = loss;
    return grads;
}

}  // namespace

void ModelConfig::validate() const {
    if (vocab_size < 1 || d_model < 1 || n_layers < 1 || n_heads < 1 || d_ff < 1 || max_seq < 1) {
        throw ArgumentError("model config: all counts must be >= 1");
    }
    if (!(init_std > 0.0) || !(head_std > 0.0)) throw ArgumentError("model config: init stds must be positive");
    if (d_model % n_heads != 0) {
        throw ArgumentError("model config: d_model " + std::to_string(d_model) + " not divisible by n_heads " +
                            std::to_string(n_heads));
    }
}

std::uint64_t BaseWeights::content_hash() const {
    const std::vector<double> header{static_cast<double>(config.vocab_size), static_cast<double>(config.d_model),
                                     static_cast<double>(config.n_layers), static_cast<double>(config.n_heads),
                                     static_cast<double>(config.d_ff), static_cast<double>(config.max_seq)};
    std::uint64_t h = linalg::hash_values(header);
    h = linalg::hash_values(token_embedding.values(), h);
    h = linalg::hash_values(position_embedding.values(), h);
    for (const auto& b : blocks) {
        for (const auto* vec : {&b.ln1_gain, &b.ln1_bias, &b.ln2_gain, &b.ln2_bias}) h = linalg::hash_values(*vec, h);
        for (const auto* m : {&b.wq, &b.wk, &b.wv, &b.wo, &b.mlp_up, &b.mlp_down}) h = linalg::hash_values(m->values(), h);
    }
    h = linalg::hash_values(final_gain, h);
    h = linalg::hash_values(final_bias, h);
    return linalg::hash_values(head.values(), h);
}

const Matrix& BaseWeights::site_weight(const SiteId& site) const {
    if (site.layer < 0 || static_cast<std::size_t>(site.layer) >= blocks.size()) {
        throw StructuralError("no such site " + site.str());
    }
    const auto& b = blocks[static_cast<std::size_t>(site.layer)];
    return site.kind == adapters::SiteKind::mlp_up ? b.mlp_up : b.mlp_down;
}

Matrix& BaseWeights::site_weight(const SiteId& site) {
    return const_cast<Matrix&>(static_cast<const BaseWeights&>(*this).site_weight(site));
}

std::vector<SiteId> adapted_sites(const ModelConfig& config) {
    std::vector<SiteId> out;
    for (int l = 0; l < config.n_layers; ++l) {
        out.push_back(SiteId{l, adapters::SiteKind::mlp_up});
        out.push_back(SiteId{l, adapters::SiteKind::mlp_down});
    }
    return out;
}

SiteShape site_shape(const ModelConfig& config, const SiteId& site) {
    const auto d = static_cast<std::size_t>(config.d_model);
    const auto f = static_cast<std::size_t>(config.d_ff);
    return site.kind == adapters::SiteKind::mlp_up ? SiteShape{d, f} : SiteShape{f, d};
}

BaseWeights init_base(const ModelConfig& config) {
    config.validate();
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> normal(0.0, config.init_std);
    auto gaussian = [&](std::size_t r, std::size_t c) {
        Matrix m(r, c);
        for (double& x : m.values()) x = normal(rng);
        return m;
    };
    const auto v = static_cast<std::size_t>(config.vocab_size);
    const auto d = static_cast<std::size_t>(config.d_model);
    const auto f = static_cast<std::size_t>(config.d_ff);
    BaseWeights w;
    w.config = config;
    w.token_embedding = gaussian(v, d);
    w.position_embedding = gaussian(static_cast<std::size_t>(config.max_seq), d);
    for (int l = 0; l < config.n_layers; ++l) {
        BlockWeights b;
        b.ln1_gain.assign(d, 1.0);
        b.ln1_bias.assign(d, 0.0);
        b.ln2_gain.assign(d, 1.0);
        b.ln2_bias.assign(d, 0.0);
        b.wq = gaussian(d, d);
        b.wk = gaussian(d, d);
        b.wv = gaussian(d, d);
        b.wo = gaussian(d, d);
        b.mlp_up = gaussian(f, d);
        b.mlp_down = gaussian(d, f);
        w.blocks.push_back(std::move(b));
    }
    w.final_gain.assign(d, 1.0);
    w.final_bias.assign(d, 0.0);
    std::normal_distribution<double> head_normal(0.0, config.head_std);
    w.head = Matrix(v, d);
    for (double& x : w.head.values()) x = head_normal(rng);
    return w;
}

std::vector<Matrix> forward(const BaseWeights& base, const TaskAdapter* task, const MergedKnowledge* merged,
                            const Batch& batch) {
    const Stack stack = make_stack(base.config, task, merged, nullptr);
    const Runner runner(base, stack);
    std::vector<Matrix> out;
    out.reserve(batch.rows.size());
    for (const auto& s : batch.rows) out.push_back(matmul_nt(runner.hidden(s.tokens, nullptr), base.head));
    return out;
}

double loss_ce(const std::vector<Matrix>& logits, const Batch& batch) {
    if (logits.size() != batch.rows.size()) throw ShapeError("loss_ce: logits/batch size mismatch");
    const std::size_t n = masked_count(batch);
    if (n == 0) throw EmptyLossError("loss_ce: loss mask selects no positions");
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const auto& s = batch.rows[i];
        if (logits[i].rows() != s.tokens.size()) throw ShapeError("loss_ce: logits rows != sequence length");
        for (std::size_t t = 0; t < s.tokens.size(); ++t) {
            if (!s.loss_mask[t]) continue;
            auto r = logits[i].row(t);
            const double mx = *std::max_element(r.begin(), r.end());
            double sum = 0.0;
            for (double x : r) sum += std::exp(x - mx);
            total += mx + std::log(sum) - r[static_cast<std::size_t>(s.targets[t])];
        }
    }
    return total / static_cast<double>(n);
}

LoraGrads backward_lora(const BaseWeights& base, const TaskAdapter* task, const KnowledgeAdapter& know,
                        const Batch& batch) {
    const Stack stack = make_stack(base.config, task, nullptr, &know.layers);
    LoraGrads grads = run_backward(base, stack, know.layers, batch);
    if (know.variant == adapters::Variant::hard) {
        if (know.bases.size() != know.layers.size()) {
            throw StructuralError("backward_lora: hard adapter '" + know.doc_id + "' has no null-space bases");
        }
        // A = A_hat V_perp^T  =>  dL/dA_hat = dL/dA V_perp
        for (std::size_t i = 0; i < grads.a.size(); ++i) grads.a[i] = matmul(grads.a[i], know.bases[i]->v_perp);
    }
    return grads;
}

LoraGrads backward_task(const BaseWeights& base, const TaskAdapter& task, const Batch& batch) {
    const Stack stack = make_stack(base.config, nullptr, nullptr, &task.layers);
    return run_backward(base, stack, task.layers, batch);
}

double loss_with_knowledge(const BaseWeights& base, const TaskAdapter* task, const KnowledgeAdapter& know,
                           const Batch& batch) {
    const Stack stack = make_stack(base.config, task, nullptr, &know.layers);
    const Runner runner(base, stack);
    std::vector<Matrix> logits;
    for (const auto& s : batch.rows) logits.push_back(matmul_nt(runner.hidden(s.tokens, nullptr), base.head));
    return loss_ce(logits, batch);
}

std::vector<int> greedy_decode(const BaseWeights& base, const TaskAdapter* task, const MergedKnowledge* merged,
                               const std::vector<int>& prompt, int max_new_tokens, int eos) {
    if (prompt.empty()) throw ArgumentError("greedy_decode: empty prompt");
    const Stack stack = make_stack(base.config, task, merged, nullptr);
    const Runner runner(base, stack);
    std::vector<int> context = prompt;
    std::vector<int> out;
    const auto vocab = static_cast<std::size_t>(base.config.vocab_size);
    for (int step = 0; step < max_new_tokens; ++step) {
        if (context.size() >= static_cast<std::size_t>(base.config.max_seq)) break;
        const Matrix z = runner.hidden(context, nullptr);
        auto last = z.row(z.rows() - 1);
        int best = 0;
        double best_logit = -std::numeric_limits<double>::infinity();
        for (std::size_t v = 0; v < vocab; ++v) {
            auto hr = base.head.row(v);
            double acc = 0.0;
            for (std::size_t c = 0; c < last.size(); ++c) acc += last[c] * hr[c];
            if (acc > best_logit) {
                best_logit = acc;
                best = static_cast<int>(v);
            }
        }
        if (best == eos) break;
        out.push_back(best);
        context.push_back(best);
    }
    return out;
}

}  // namespace osd::model
