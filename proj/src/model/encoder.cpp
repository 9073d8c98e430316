#include "model/encoder.hpp"

#include <algorithm>

namespace sephr {

std::size_t EncoderConfig::max_branches() const {
    return branches_per_stage.empty() ? 0 : *std::max_element(branches_per_stage.begin(), branches_per_stage.end());
}

std::size_t EncoderConfig::convertible_layers() const {
    std::size_t n = 0;
    for (auto b : branches_per_stage) n += b;
    return n;
}

std::vector<std::size_t> EncoderConfig::converted_widths() const {
    std::vector<std::size_t> widths;
    for (auto branches : branches_per_stage)
        for (std::size_t b = 0; b < branches; ++b)
            if (widths.size() < shallow_separable_depth) widths.push_back(channels_per_branch[b]);
    return widths;
}

std::size_t EncoderConfig::pooled_features() const {
    std::size_t channels = reduce_channels;
    if (channels == 0)
        for (std::size_t i = 0; i < max_branches(); ++i) channels += channels_per_branch[i];
    return pooling == Pooling::flatten ? channels * coarse_height() * coarse_width() : channels;
}

void EncoderConfig::validate() const {
    SEPHR_CHECK(in_channels >= 1, ErrorKind::config, "encoder.in_channels must be >= 1");
    SEPHR_CHECK(n_stages >= 1, ErrorKind::config, "encoder.n_stages must be >= 1");
    SEPHR_CHECK(branches_per_stage.size() == n_stages, ErrorKind::config, "encoder.branches has ",
                branches_per_stage.size(), " entries for ", n_stages, " stages");
    SEPHR_CHECK(branches_per_stage.front() >= 1, ErrorKind::config, "the first stage needs at least one branch");
    for (std::size_t s = 1; s < n_stages; ++s)
        SEPHR_CHECK(branches_per_stage[s] >= branches_per_stage[s - 1], ErrorKind::config,
                    "branches per stage must be non-decreasing, stage ", s, " has ", branches_per_stage[s],
                    " after ", branches_per_stage[s - 1]);
    SEPHR_CHECK(channels_per_branch.size() >= max_branches(), ErrorKind::config, "encoder.channels lists ",
                channels_per_branch.size(), " branches, stages use ", max_branches());
    for (auto c : channels_per_branch) SEPHR_CHECK(c >= 1, ErrorKind::config, "branch channels must be >= 1");
    SEPHR_CHECK(stem_channels >= 1, ErrorKind::config, "encoder.stem_channels must be >= 1");
    SEPHR_CHECK(kernel % 2 == 1, ErrorKind::config, "encoder.kernel must be odd, got ", kernel);
    SEPHR_CHECK(shallow_separable_depth <= convertible_layers(), ErrorKind::config,
                "encoder.separable_depth ", shallow_separable_depth, " exceeds the ", convertible_layers(),
                " branch conv layers");
    SEPHR_CHECK(embed_dim >= 1, ErrorKind::config, "encoder.embed_dim must be >= 1");
    SEPHR_CHECK(n_heads == 1 || n_heads == 3, ErrorKind::config, "encoder heads must be 1 or 3, got ", n_heads);
    if (pointwise_heads) {
        SEPHR_CHECK(pooling == Pooling::flatten, ErrorKind::config, "pointwise heads need flatten pooling");
        const std::size_t area = (height >> (max_branches() - 1)) * (width >> (max_branches() - 1));
        SEPHR_CHECK(area > 0 && embed_dim % area == 0, ErrorKind::config, "embedding size ", embed_dim,
                    " is not a multiple of the coarse grid area ", area);
    }
    const std::size_t div = std::size_t{1} << (max_branches() - 1);
    SEPHR_CHECK(height >= div && width >= div && height % div == 0 && width % div == 0, ErrorKind::config,
                "input extent ", height, "x", width, " is not divisible by ", div, " (2^", max_branches() - 1,
                " for the coarsest branch)");
}

ConvUnit ConvUnit::standard(ParamScope& scope, const std::string& name, std::size_t c_in, std::size_t c_out,
                            std::size_t k, std::size_t stride, bool relu) {
    ConvUnit u;
    u.k = k;
    u.stride = stride;
    u.padding = k / 2;
    u.relu = relu;
    u.kernel = scope.weight(name + ".weight", {c_out, c_in, k, k}, c_in * k * k);
    u.bn = scope.batch_norm(name + ".bn", c_out);
    return u;
}

ConvUnit ConvUnit::separable_unit(ParamScope& scope, const std::string& name, std::size_t c_in,
                                  std::size_t c_out, std::size_t k, bool relu) {
    ConvUnit u;
    u.separable = true;
    u.k = k;
    u.padding = k / 2;
    u.relu = relu;
    u.w_row = scope.weight(name + ".weight_row", {c_out, c_in, k, 1}, c_in * k, 1.0);
    u.w_col = scope.weight(name + ".weight_col", {c_out, c_out, 1, k}, c_out * k);
    u.bn = scope.batch_norm(name + ".bn", c_out);
    return u;
}

Tensor ConvUnit::forward(const Tensor& x, NormMode mode, double momentum) {
    Tensor y = separable ? separable_conv2d(x, w_row, w_col, stride, padding)
                         : conv2d(x, kernel, {}, stride, padding);
    y = batch_norm(y, bn, {mode, momentum});
    return relu ? sephr::relu(y) : y;
}

Encoder::Encoder(const EncoderConfig& cfg, ParamScope scope) : cfg_(cfg) {
    cfg_.validate();
    const std::size_t k = cfg_.kernel;
    const auto& ch = cfg_.channels_per_branch;
    const std::size_t before = scope.count();

    stem_ = ConvUnit::standard(scope, "stem", cfg_.in_channels, cfg_.stem_channels, k, 1, true);
    if (cfg_.stem_channels != ch[0])
        transition_.push_back(ConvUnit::standard(scope, "transition", cfg_.stem_channels, ch[0], 1, 1, true));
    std::size_t active = 0;
    std::size_t converted = 0;
    for (std::size_t s = 0; s < cfg_.n_stages; ++s) {
        ParamScope st = scope.child("stage" + std::to_string(s));
        Stage stage;
        const std::size_t nb = cfg_.branches_per_stage[s];
        for (std::size_t b = std::max<std::size_t>(active, 1); b < nb; ++b)
            stage.new_branches.push_back(
                ConvUnit::standard(st, "branch" + std::to_string(b), ch[b - 1], ch[b], k, 2, true));
        active = nb;
        for (std::size_t b = 0; b < nb; ++b) {
            const std::string name = "block" + std::to_string(b);
            if (converted < cfg_.shallow_separable_depth) {
                stage.blocks.push_back(ConvUnit::separable_unit(st, name, ch[b], ch[b], k, true));
                ++converted;
            } else {
                stage.blocks.push_back(ConvUnit::standard(st, name, ch[b], ch[b], k, 1, true));
            }
        }
        if (nb > 1) {
            stage.fuse.resize(nb, std::vector<std::vector<ConvUnit>>(nb));
            for (std::size_t j = 0; j < nb; ++j)
                for (std::size_t i = 0; i < nb; ++i) {
                    const std::string name = "fuse" + std::to_string(i) + "to" + std::to_string(j);
                    auto& path = stage.fuse[j][i];
                    if (i > j) {
                        path.push_back(ConvUnit::standard(st, name, ch[i], ch[j], 1, 1, false));
                    } else if (i < j) {
                        for (std::size_t step = i; step < j; ++step) {
                            const bool last = step + 1 == j;
                            path.push_back(ConvUnit::standard(st, name + "." + std::to_string(step - i), ch[i],
                                                              last ? ch[j] : ch[i], k, 2, !last));
                        }
                    }
                }
        }
        stages_.push_back(std::move(stage));
    }

    std::size_t concat_channels = 0;
    for (std::size_t b = 0; b < active; ++b) concat_channels += ch[b];
    if (cfg_.reduce_channels > 0)
        reduce_.push_back(ConvUnit::standard(scope, "reduce", concat_channels, cfg_.reduce_channels, 1, 1, true));

    const std::size_t features = cfg_.pooled_features();
    const std::size_t channels = cfg_.reduce_channels ? cfg_.reduce_channels : concat_channels;
    const std::size_t per_cell = cfg_.embed_dim / (cfg_.coarse_height() * cfg_.coarse_width());
    static const char* names[] = {"query", "key", "value"};
    for (std::size_t h = 0; h < cfg_.n_heads; ++h) {
        const std::string name = cfg_.n_heads == 1 ? std::string("embed") : std::string(names[h]);
        if (cfg_.pointwise_heads) {
            head_w_.push_back(scope.weight(name + ".weight", {per_cell, channels, 1, 1}, channels, 1.0));
            head_b_.push_back(scope.zeros(name + ".bias", {per_cell}));
        } else {
            head_w_.push_back(scope.weight(name + ".weight", {features, cfg_.embed_dim}, features, 1.0));
            head_b_.push_back(scope.zeros(name + ".bias", {cfg_.embed_dim}));
        }
    }
    param_count_ = scope.count() - before;
}

std::vector<Tensor> Encoder::forward(const Tensor& frames, NormMode mode) {
    SEPHR_CHECK(frames.rank() == 4 && frames.dim(1) == cfg_.in_channels && frames.dim(2) == cfg_.height &&
                    frames.dim(3) == cfg_.width,
                ErrorKind::config, "encoder expects [N, ", cfg_.in_channels, ", ", cfg_.height, ", ", cfg_.width,
                "] frames, got ", shape_str(frames.shape()));
    const double m = cfg_.bn_momentum;
    std::vector<Tensor> branches{stem_.forward(frames, mode, m)};
    for (auto& unit : transition_) branches[0] = unit.forward(branches[0], mode, m);
    stage_shapes_.clear();
    for (auto& stage : stages_) {
        for (auto& unit : stage.new_branches) branches.push_back(unit.forward(branches.back(), mode, m));
        for (std::size_t b = 0; b < stage.blocks.size(); ++b) branches[b] = stage.blocks[b].forward(branches[b], mode, m);
        if (!stage.fuse.empty()) {
            std::vector<Tensor> fused;
            for (std::size_t j = 0; j < branches.size(); ++j) {
                Tensor acc;
                for (std::size_t i = 0; i < branches.size(); ++i) {
                    Tensor t = branches[i];
                    for (auto& unit : stage.fuse[j][i]) t = unit.forward(t, mode, m);
                    if (i > j) t = upsample_nearest(t, std::size_t{1} << (i - j));
                    acc = acc.defined() ? add(acc, t) : t;
                }
                fused.push_back(relu(acc));
            }
            branches = std::move(fused);
        }
        std::vector<Shape> shapes;
        for (const auto& b : branches) shapes.push_back(b.shape());
        stage_shapes_.push_back(std::move(shapes));
    }

    const std::size_t last = branches.size() - 1;
    std::vector<Tensor> coarse;
    for (std::size_t i = 0; i < branches.size(); ++i)
        coarse.push_back(i == last ? branches[i] : avg_pool2d(branches[i], std::size_t{1} << (last - i)));
    Tensor feat = coarse.size() == 1 ? coarse[0] : concat(std::span<const Tensor>(coarse), 1);
    for (auto& unit : reduce_) feat = unit.forward(feat, mode, m);
    const std::size_t n = frames.dim(0);
    std::vector<Tensor> out;
    if (cfg_.pointwise_heads) {
        for (std::size_t h = 0; h < head_w_.size(); ++h)
            out.push_back(reshape(conv2d(feat, head_w_[h], head_b_[h]), {n, cfg_.embed_dim}));
        return out;
    }
    Tensor pooled = cfg_.pooling == Pooling::flatten ? reshape(feat, {n, feat.numel() / n}) : global_avg_pool(feat);
    for (std::size_t h = 0; h < head_w_.size(); ++h) out.push_back(affine(pooled, head_w_[h], head_b_[h]));
    return out;
}

FrameEmbedding Encoder::encode(const Tensor& frame, NormMode mode) {
    SEPHR_CHECK(frame.rank() == 3, ErrorKind::config, "encode expects a [C, H, W] frame, got ",
                shape_str(frame.shape()));
    auto heads = forward(reshape(frame, {1, frame.dim(0), frame.dim(1), frame.dim(2)}), mode);
    for (auto& h : heads) h = reshape(h, {cfg_.embed_dim});
    if (heads.size() == 1) return {heads[0], heads[0], heads[0]};
    return {heads[0], heads[1], heads[2]};
}

BuiltEncoder build_encoder(const EncoderConfig& cfg, std::uint64_t seed) {
    ParameterSet params;
    Rng rng(seed);
    Encoder enc(cfg, ParamScope(params, "encoder.", rng));
    return {std::move(params), std::move(enc)};
}

}  // namespace sephr
