#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tensor/module.hpp"
#include "tensor/ops.hpp"

namespace sephr {

struct DecoderBlock {
    std::size_t out_channels = 0, kernel = 4, stride = 2, padding = 1;
};

struct DecoderConfig {
    std::size_t seed_channels = 4, seed_extent = 4;
    // The last block emits n_classes channels.
    std::vector<DecoderBlock> blocks{{32, 4, 2, 1}, {16, 4, 2, 1}, {6, 4, 2, 1}};
    std::size_t n_classes = 6;
    std::size_t height = 32, width = 32;
    double bn_momentum = 0.1;

    // Spatial extent after the seed and after each block. Entries may be
    // non-positive when the geometry is invalid.
    std::vector<long> extent_chain() const;
    void validate(std::size_t embed_dim) const;
};

// Upsampling stack: reshape the vector to a seed grid, then transposed conv
// blocks (conv -> bias -> batch norm -> ReLU); the last block stops at the
// biased logits.
class Decoder {
public:
    Decoder(const DecoderConfig& cfg, std::size_t embed_dim, ParamScope scope);

    // [B, embed_dim] -> [B, K, H, W]; [embed_dim] -> [K, H, W].
    Tensor forward(const Tensor& agg, NormMode mode);

    const DecoderConfig& config() const { return cfg_; }
    std::size_t param_count() const { return param_count_; }

    struct Block {
        Tensor kernel, bias;
        BatchNormParams bn;
        DecoderBlock spec;
    };
    std::vector<Block>& blocks() { return blocks_; }

private:
    DecoderConfig cfg_;
    std::size_t embed_dim_;
    std::vector<Block> blocks_;
    std::size_t param_count_ = 0;
};

// Per-pixel class index of the largest logit; ties go to the lowest index.
// logits: [K, H, W] or [N, K, H, W]; result is row-major N x H x W.
std::vector<std::int32_t> argmax_labels(const Tensor& logits);

}  // namespace sephr
