#pragma once

#include <span>
#include <vector>

#include "tensor/module.hpp"
#include "tensor/ops.hpp"

namespace sephr {

// Stacks T vectors of length d into [T, d]. An empty list is a data error.
Tensor stack_sequence(std::span<const Tensor> frames);

struct AttentionResult {
    Tensor output;   // same shape as v
    Tensor weights;  // [..., T, T], rows sum to 1
};

// softmax(q k^T / sqrt(d)) v for [T, d] or [B, T, d] operands.
AttentionResult attention_with_weights(const Tensor& q, const Tensor& k, const Tensor& v);
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v);

// Sinusoidal position table [T, d].
Tensor positional_table(std::size_t t, std::size_t d);

struct AttentionConfig {
    std::size_t n_heads = 6;
    std::size_t embed_dim = 64;
    bool positional = false;

    std::size_t head_dim() const { return embed_dim / n_heads; }
    void validate() const;
};

// Per-head projections, scaled dot-product attention, concatenation, output
// projection, then a sum over the time axis.
class MultiHeadAttention {
public:
    MultiHeadAttention(const AttentionConfig& cfg, ParamScope scope);

    // [T, d] -> [d] or [B, T, d] -> [B, d].
    Tensor forward(const Tensor& q, const Tensor& k, const Tensor& v) const;

    const AttentionConfig& config() const { return cfg_; }
    std::size_t param_count() const { return param_count_; }
    Tensor query_weight(std::size_t head) const { return wq_[head]; }
    Tensor key_weight(std::size_t head) const { return wk_[head]; }
    Tensor value_weight(std::size_t head) const { return wv_[head]; }
    Tensor output_weight() const { return wo_; }
    Tensor output_bias() const { return bo_; }

private:
    AttentionConfig cfg_;
    std::vector<Tensor> wq_, wk_, wv_;
    Tensor wo_, bo_;
    std::size_t param_count_ = 0;
};

struct LstmConfig {
    std::size_t layers = 3;
    std::size_t hidden = 256;
    bool bidirectional = true;
    std::size_t input_dim = 64;
    std::size_t output_dim = 64;

    void validate() const;
};

struct LstmState {
    Tensor h, c;  // [B, H]
};

// One bias-free step. x: [B, in]; w_x: [in, 4H]; w_h: [H, 4H]. Gate order
// along the 4H axis: input, forget, cell candidate, output.
LstmState lstm_cell(const Tensor& x, const LstmState& state, const Tensor& w_x, const Tensor& w_h);

class Lstm {
public:
    Lstm(const LstmConfig& cfg, ParamScope scope);

    // [B, T, in] -> [B, output_dim]: last forward and backward hidden states
    // of the top layer, concatenated and projected.
    Tensor forward(const Tensor& seq) const;

    const LstmConfig& config() const { return cfg_; }
    std::size_t param_count() const { return param_count_; }

private:
    struct Direction {
        Tensor w_x, w_h;
    };
    LstmConfig cfg_;
    std::vector<std::vector<Direction>> layers_;
    Tensor proj_;
    std::size_t param_count_ = 0;
};

// Elementwise mean of equally shaped maps.
Tensor mean_aggregate(std::span<const Tensor> maps);

}  // namespace sephr
