#include "model/temporal.hpp"

#include <cmath>

namespace sephr {

Tensor stack_sequence(std::span<const Tensor> frames) {
    SEPHR_CHECK(!frames.empty(), ErrorKind::data, "empty sequence: at least one frame is required");
    std::vector<Tensor> rows;
    for (const auto& f : frames) {
        SEPHR_CHECK(f.rank() == 1 && f.dim(0) == frames[0].dim(0), ErrorKind::config,
                    "sequence entries must be vectors of equal length, got ", shape_str(f.shape()));
        rows.push_back(reshape(f, {1, f.dim(0)}));
    }
    return concat(std::span<const Tensor>(rows), 0);
}

AttentionResult attention_with_weights(const Tensor& q, const Tensor& k, const Tensor& v) {
    SEPHR_CHECK(q.shape() == k.shape() && q.shape() == v.shape() && (q.rank() == 2 || q.rank() == 3),
                ErrorKind::config, "attention needs equal [T, d] or [B, T, d] operands, got ", shape_str(q.shape()),
                ", ", shape_str(k.shape()), ", ", shape_str(v.shape()));
    const std::size_t d = q.dim(q.rank() - 1);
    Tensor scores = scale(matmul(q, transpose(k)), 1.0 / std::sqrt(static_cast<double>(d)));
    Tensor weights = softmax(scores, scores.rank() - 1);
    return {matmul(weights, v), weights};
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v) {
    return attention_with_weights(q, k, v).output;
}

Tensor positional_table(std::size_t t, std::size_t d) {
    std::vector<double> v(t * d);
    for (std::size_t pos = 0; pos < t; ++pos)
        for (std::size_t i = 0; i < d; ++i) {
            const double rate = std::pow(10000.0, -static_cast<double>(i - i % 2) / static_cast<double>(d));
            const double angle = static_cast<double>(pos) * rate;
            v[pos * d + i] = i % 2 == 0 ? std::sin(angle) : std::cos(angle);
        }
    return Tensor::from({t, d}, std::move(v));
}

void AttentionConfig::validate() const {
    SEPHR_CHECK(n_heads >= 1, ErrorKind::config, "attention.heads must be >= 1");
    SEPHR_CHECK(embed_dim % n_heads == 0, ErrorKind::config, "embedding size ", embed_dim,
                " is not divisible by ", n_heads, " attention heads");
}

MultiHeadAttention::MultiHeadAttention(const AttentionConfig& cfg, ParamScope scope) : cfg_(cfg) {
    cfg_.validate();
    const std::size_t d = cfg_.embed_dim, dh = cfg_.head_dim();
    const std::size_t before = scope.count();
    for (std::size_t i = 0; i < cfg_.n_heads; ++i) {
        const std::string head = "head" + std::to_string(i);
        wq_.push_back(scope.weight(head + ".query", {d, dh}, d, 1.0));
        wk_.push_back(scope.weight(head + ".key", {d, dh}, d, 1.0));
        wv_.push_back(scope.weight(head + ".value", {d, dh}, d, 1.0));
    }
    wo_ = scope.weight("output.weight", {d, d}, d, 1.0);
    bo_ = scope.zeros("output.bias", {d});
    param_count_ = scope.count() - before;
}

Tensor MultiHeadAttention::forward(const Tensor& q, const Tensor& k, const Tensor& v) const {
    SEPHR_CHECK(q.rank() >= 2 && q.dim(q.rank() - 1) == cfg_.embed_dim, ErrorKind::config,
                "multi-head attention expects [..., T, ", cfg_.embed_dim, "] inputs, got ", shape_str(q.shape()));
    Tensor qq = q, kk = k, vv = v;
    if (cfg_.positional) {
        const Tensor pe = positional_table(q.dim(q.rank() - 2), cfg_.embed_dim);
        qq = add(qq, pe);
        kk = add(kk, pe);
        vv = add(vv, pe);
    }
    std::vector<Tensor> heads;
    for (std::size_t i = 0; i < cfg_.n_heads; ++i)
        heads.push_back(attention(matmul(qq, wq_[i]), matmul(kk, wk_[i]), matmul(vv, wv_[i])));
    Tensor joined = heads.size() == 1 ? heads[0] : concat(std::span<const Tensor>(heads), q.rank() - 1);
    return sum(affine(joined, wo_, bo_), q.rank() - 2);
}

void LstmConfig::validate() const {
    SEPHR_CHECK(layers >= 1, ErrorKind::config, "lstm.layers must be >= 1");
    SEPHR_CHECK(hidden >= 1 && input_dim >= 1 && output_dim >= 1, ErrorKind::config,
                "lstm sizes must be positive");
}

LstmState lstm_cell(const Tensor& x, const LstmState& state, const Tensor& w_x, const Tensor& w_h) {
    const std::size_t h = state.h.dim(1);
    Tensor z = add(matmul(x, w_x), matmul(state.h, w_h));
    Tensor i = sigmoid(slice(z, 1, 0, h));
    Tensor f = sigmoid(slice(z, 1, h, 2 * h));
    Tensor g = tanh(slice(z, 1, 2 * h, 3 * h));
    Tensor o = sigmoid(slice(z, 1, 3 * h, 4 * h));
    Tensor c = add(mul(f, state.c), mul(i, g));
    return {mul(o, tanh(c)), c};
}

Lstm::Lstm(const LstmConfig& cfg, ParamScope scope) : cfg_(cfg) {
    cfg_.validate();
    const std::size_t dirs = cfg_.bidirectional ? 2 : 1;
    const std::size_t before = scope.count();
    for (std::size_t l = 0; l < cfg_.layers; ++l) {
        const std::size_t in = l == 0 ? cfg_.input_dim : dirs * cfg_.hidden;
        std::vector<Direction> layer;
        for (std::size_t d = 0; d < dirs; ++d) {
            const std::string name = "layer" + std::to_string(l) + (d == 0 ? ".forward" : ".backward");
            layer.push_back({scope.weight(name + ".input", {in, 4 * cfg_.hidden}, in, 1.0),
                             scope.weight(name + ".hidden", {cfg_.hidden, 4 * cfg_.hidden}, cfg_.hidden, 1.0)});
        }
        layers_.push_back(std::move(layer));
    }
    proj_ = scope.weight("projection", {dirs * cfg_.hidden, cfg_.output_dim}, dirs * cfg_.hidden, 1.0);
    param_count_ = scope.count() - before;
}

Tensor Lstm::forward(const Tensor& seq) const {
    SEPHR_CHECK(seq.rank() == 3 && seq.dim(2) == cfg_.input_dim, ErrorKind::config, "lstm expects [B, T, ",
                cfg_.input_dim, "] input, got ", shape_str(seq.shape()));
    const std::size_t b = seq.dim(0), t = seq.dim(1), hid = cfg_.hidden;
    std::vector<Tensor> steps;
    for (std::size_t s = 0; s < t; ++s) steps.push_back(reshape(slice(seq, 1, s, s + 1), {b, seq.dim(2)}));

    std::vector<Tensor> last;
    for (const auto& layer : layers_) {
        std::vector<std::vector<Tensor>> outs(layer.size(), std::vector<Tensor>(t));
        last.clear();
        for (std::size_t d = 0; d < layer.size(); ++d) {
            LstmState state{Tensor::zeros({b, hid}), Tensor::zeros({b, hid})};
            for (std::size_t s = 0; s < t; ++s) {
                const std::size_t at = d == 0 ? s : t - 1 - s;
                state = lstm_cell(steps[at], state, layer[d].w_x, layer[d].w_h);
                outs[d][at] = state.h;
            }
            last.push_back(state.h);
        }
        if (layer.size() == 1) {
            steps = outs[0];
        } else {
            for (std::size_t s = 0; s < t; ++s) steps[s] = concat({outs[0][s], outs[1][s]}, 1);
        }
    }
    Tensor h = last.size() == 1 ? last[0] : concat(std::span<const Tensor>(last), 1);
    return matmul(h, proj_);
}

Tensor mean_aggregate(std::span<const Tensor> maps) {
    SEPHR_CHECK(!maps.empty(), ErrorKind::data, "mean of an empty list of maps");
    Tensor acc = maps[0];
    for (std::size_t i = 1; i < maps.size(); ++i) {
        SEPHR_CHECK(maps[i].shape() == maps[0].shape(), ErrorKind::config, "map ", i, " has shape ",
                    shape_str(maps[i].shape()), ", expected ", shape_str(maps[0].shape()));
        acc = add(acc, maps[i]);
    }
    return maps.size() == 1 ? acc : scale(acc, 1.0 / static_cast<double>(maps.size()));
}

}  // namespace sephr
