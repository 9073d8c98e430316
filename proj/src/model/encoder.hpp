#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tensor/module.hpp"
#include "tensor/ops.hpp"

namespace sephr {

enum class Pooling {
    global_average,  // mean over the coarsest grid, one value per channel
    flatten,         // keep the coarse grid: channels x h x w values
};

struct EncoderConfig {
    std::size_t in_channels = 4;
    std::size_t height = 32, width = 32;
    std::size_t n_stages = 3;
    std::vector<std::size_t> branches_per_stage{1, 2, 3};
    std::vector<std::size_t> channels_per_branch{16, 32, 64};
    std::size_t shallow_separable_depth = 2;
    std::size_t stem_channels = 16;
    std::size_t kernel = 3;
    std::size_t embed_dim = 64;
    // 3 gives q/k/v projections; 1 gives a single embedding vector.
    std::size_t n_heads = 3;
    Pooling pooling = Pooling::global_average;
    // 1x1 conv to this many channels before pooling; 0 disables it.
    std::size_t reduce_channels = 0;
    // Dense heads map the pooled vector with a full matrix. Pointwise heads
    // (flatten pooling only) apply a shared 1x1 projection at every coarse
    // position and flatten, so embed_dim = channels x coarse area.
    bool pointwise_heads = false;
    double bn_momentum = 0.1;

    std::size_t max_branches() const;
    // Branch convolutions that may be replaced by separable ones, in order.
    std::size_t convertible_layers() const;
    // Channel width of each branch convolution made separable, in build order.
    std::vector<std::size_t> converted_widths() const;
    std::size_t coarse_height() const { return height >> (max_branches() - 1); }
    std::size_t coarse_width() const { return width >> (max_branches() - 1); }
    std::size_t pooled_features() const;
    // Throws ErrorKind::config describing the first violated invariant.
    void validate() const;
};

struct FrameEmbedding {
    Tensor q, k, v;
};

// One conv -> batch norm -> optional ReLU unit, standard or separable.
struct ConvUnit {
    bool separable = false;
    Tensor kernel, w_row, w_col;
    std::size_t k = 3, stride = 1, padding = 1;
    BatchNormParams bn;
    bool relu = true;

    static ConvUnit standard(ParamScope& scope, const std::string& name, std::size_t c_in, std::size_t c_out,
                             std::size_t k, std::size_t stride, bool relu);
    static ConvUnit separable_unit(ParamScope& scope, const std::string& name, std::size_t c_in,
                                   std::size_t c_out, std::size_t k, bool relu);

    Tensor forward(const Tensor& x, NormMode mode, double momentum);
};

// Multi-resolution encoder: stem, stages of parallel branches with
// resample-and-sum fusion, coarse-grid concatenation, pooling, heads.
class Encoder {
public:
    Encoder(const EncoderConfig& cfg, ParamScope scope);

    // frames: [N, C, H, W] -> one [N, embed_dim] tensor per head.
    std::vector<Tensor> forward(const Tensor& frames, NormMode mode);
    // Single frame [C, H, W]; with one head q, k and v alias the same vector.
    FrameEmbedding encode(const Tensor& frame, NormMode mode);

    std::size_t param_count() const { return param_count_; }
    const EncoderConfig& config() const { return cfg_; }
    // Branch feature shapes after each stage's fusion, from the last forward.
    const std::vector<std::vector<Shape>>& stage_shapes() const { return stage_shapes_; }

private:
    struct Stage {
        std::vector<ConvUnit> new_branches;
        std::vector<ConvUnit> blocks;  // one per branch
        // fuse[j][i]: units taking branch i to branch j's resolution.
        std::vector<std::vector<std::vector<ConvUnit>>> fuse;
    };

    EncoderConfig cfg_;
    ConvUnit stem_;
    std::vector<ConvUnit> transition_;
    std::vector<Stage> stages_;
    std::vector<ConvUnit> reduce_;
    std::vector<Tensor> head_w_, head_b_;  // [F, d] or [d / area, C, 1, 1]
    std::size_t param_count_ = 0;
    std::vector<std::vector<Shape>> stage_shapes_;
};

struct BuiltEncoder {
    ParameterSet params;
    Encoder encoder;
};

BuiltEncoder build_encoder(const EncoderConfig& cfg, std::uint64_t seed);

}  // namespace sephr
