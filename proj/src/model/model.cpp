#include "model/model.hpp"

#include <charconv>

namespace sephr {

std::string paradigm_name(Paradigm p) {
    switch (p) {
        case Paradigm::ed: return "ed";
        case Paradigm::eld: return "eld";
        case Paradigm::esd: return "esd";
    }
    return "?";
}

Paradigm parse_paradigm(const std::string& name) {
    if (name == "ed") return Paradigm::ed;
    if (name == "eld") return Paradigm::eld;
    if (name == "esd") return Paradigm::esd;
    detail::raise(ErrorKind::unknown_preset, "unknown paradigm '", name, "' (expected ed, eld or esd)");
}

ModelConfig ModelConfig::resolved() const {
    ModelConfig c = *this;
    c.encoder.n_heads = c.paradigm == Paradigm::esd ? 3 : 1;
    c.attention.embed_dim = c.encoder.embed_dim;
    c.lstm.input_dim = c.lstm.output_dim = c.encoder.embed_dim;
    c.decoder.height = c.encoder.height;
    c.decoder.width = c.encoder.width;
    c.decoder.bn_momentum = c.encoder.bn_momentum;
    if (!c.decoder.blocks.empty()) c.decoder.blocks.back().out_channels = c.decoder.n_classes;
    c.encoder.validate();
    if (c.paradigm == Paradigm::esd) c.attention.validate();
    if (c.paradigm == Paradigm::eld) c.lstm.validate();
    c.decoder.validate(c.encoder.embed_dim);
    return c;
}

KeyValues ModelConfig::to_keyvalues() const {
    KeyValues kv;
    const auto& e = encoder;
    kv.set("model.paradigm", paradigm_name(paradigm));
    kv.set("model.classes", std::to_string(decoder.n_classes));
    kv.set("model.bn_momentum", format_real(e.bn_momentum));
    kv.set("encoder.in_channels", std::to_string(e.in_channels));
    kv.set("encoder.height", std::to_string(e.height));
    kv.set("encoder.width", std::to_string(e.width));
    kv.set("encoder.stages", std::to_string(e.n_stages));
    kv.set("encoder.branches", join_sizes(e.branches_per_stage));
    kv.set("encoder.channels", join_sizes(e.channels_per_branch));
    kv.set("encoder.separable_depth", std::to_string(e.shallow_separable_depth));
    kv.set("encoder.stem_channels", std::to_string(e.stem_channels));
    kv.set("encoder.kernel", std::to_string(e.kernel));
    kv.set("encoder.embed_dim", std::to_string(e.embed_dim));
    kv.set("encoder.pooling", e.pooling == Pooling::flatten ? "flatten" : "average");
    kv.set("encoder.reduce_channels", std::to_string(e.reduce_channels));
    kv.set("encoder.pointwise_heads", e.pointwise_heads ? "true" : "false");
    kv.set("attention.heads", std::to_string(attention.n_heads));
    kv.set("attention.positional", attention.positional ? "true" : "false");
    kv.set("lstm.layers", std::to_string(lstm.layers));
    kv.set("lstm.hidden", std::to_string(lstm.hidden));
    kv.set("lstm.bidirectional", lstm.bidirectional ? "true" : "false");
    kv.set("decoder.seed_channels", std::to_string(decoder.seed_channels));
    kv.set("decoder.seed_extent", std::to_string(decoder.seed_extent));
    std::vector<std::size_t> ch, ks, ss, ps;
    for (std::size_t i = 0; i < decoder.blocks.size(); ++i) {
        const auto& b = decoder.blocks[i];
        if (i + 1 < decoder.blocks.size()) ch.push_back(b.out_channels);
        ks.push_back(b.kernel);
        ss.push_back(b.stride);
        ps.push_back(b.padding);
    }
    kv.set("decoder.channels", ch.empty() ? "none" : join_sizes(ch));
    kv.set("decoder.kernels", join_sizes(ks));
    kv.set("decoder.strides", join_sizes(ss));
    kv.set("decoder.paddings", join_sizes(ps));
    return kv;
}

ModelConfig ModelConfig::from_keyvalues(const KeyValues& kv) {
    ModelConfig c;
    auto& e = c.encoder;
    c.paradigm = parse_paradigm(kv.str("model.paradigm", paradigm_name(c.paradigm)));
    c.decoder.n_classes = kv.size("model.classes", c.decoder.n_classes);
    e.bn_momentum = kv.real("model.bn_momentum", e.bn_momentum);
    e.in_channels = kv.size("encoder.in_channels", e.in_channels);
    e.height = kv.size("encoder.height", e.height);
    e.width = kv.size("encoder.width", e.width);
    e.branches_per_stage = kv.sizes("encoder.branches", e.branches_per_stage);
    e.n_stages = kv.size("encoder.stages", e.branches_per_stage.size());
    e.channels_per_branch = kv.sizes("encoder.channels", e.channels_per_branch);
    e.shallow_separable_depth = kv.size("encoder.separable_depth", e.shallow_separable_depth);
    e.stem_channels = kv.size("encoder.stem_channels", e.stem_channels);
    e.kernel = kv.size("encoder.kernel", e.kernel);
    e.embed_dim = kv.size("encoder.embed_dim", e.embed_dim);
    const std::string pooling = kv.str("encoder.pooling", "average");
    SEPHR_CHECK(pooling == "average" || pooling == "flatten", ErrorKind::config,
                "encoder.pooling must be average or flatten, got '", pooling, "'");
    e.pooling = pooling == "flatten" ? Pooling::flatten : Pooling::global_average;
    e.reduce_channels = kv.size("encoder.reduce_channels", e.reduce_channels);
    e.pointwise_heads = kv.flag("encoder.pointwise_heads", e.pointwise_heads);
    c.attention.n_heads = kv.size("attention.heads", c.attention.n_heads);
    c.attention.positional = kv.flag("attention.positional", c.attention.positional);
    c.lstm.layers = kv.size("lstm.layers", c.lstm.layers);
    c.lstm.hidden = kv.size("lstm.hidden", c.lstm.hidden);
    c.lstm.bidirectional = kv.flag("lstm.bidirectional", c.lstm.bidirectional);
    auto& d = c.decoder;
    d.seed_channels = kv.size("decoder.seed_channels", d.seed_channels);
    d.seed_extent = kv.size("decoder.seed_extent", d.seed_extent);
    std::vector<std::size_t> ch;
    for (std::size_t i = 0; i + 1 < d.blocks.size(); ++i) ch.push_back(d.blocks[i].out_channels);
    if (kv.str("decoder.channels", "") == "none")
        ch.clear();
    else
        ch = kv.sizes("decoder.channels", ch);
    const std::size_t n = ch.size() + 1;
    auto per_block = [&](const char* key, std::size_t fallback) {
        auto v = kv.sizes(key, {fallback});
        if (v.size() == 1) v.assign(n, v[0]);
        SEPHR_CHECK(v.size() == n, ErrorKind::config, "config key '", key, "' lists ", v.size(), " values for ", n,
                    " decoder blocks");
        return v;
    };
    const auto ks = per_block("decoder.kernels", 4), ss = per_block("decoder.strides", 2),
               ps = per_block("decoder.paddings", 1);
    d.blocks.clear();
    for (std::size_t i = 0; i < n; ++i) d.blocks.push_back({i + 1 < n ? ch[i] : d.n_classes, ks[i], ss[i], ps[i]});
    return c;
}

SegmentationModel::SegmentationModel(const ModelConfig& cfg, std::uint64_t seed)
    : cfg_(cfg.resolved()), params_(std::make_unique<ParameterSet>()) {
    Rng rng(seed);
    ParamScope root(*params_, "", rng);
    encoder_ = std::make_unique<Encoder>(cfg_.encoder, root.child("encoder"));
    if (cfg_.paradigm == Paradigm::esd)
        attention_ = std::make_unique<MultiHeadAttention>(cfg_.attention, root.child("attention"));
    if (cfg_.paradigm == Paradigm::eld) lstm_ = std::make_unique<Lstm>(cfg_.lstm, root.child("lstm"));
    decoder_ = std::make_unique<Decoder>(cfg_.decoder, cfg_.encoder.embed_dim, root.child("decoder"));
    norm_mean_ = Tensor::zeros({cfg_.encoder.in_channels});
    norm_std_ = Tensor::full({cfg_.encoder.in_channels}, 1.0);
    params_->add_buffer("data.mean", norm_mean_);
    params_->add_buffer("data.std", norm_std_);
}

Tensor SegmentationModel::forward(const Tensor& frames, NormMode mode) {
    const auto& e = cfg_.encoder;
    SEPHR_CHECK(frames.rank() == 5 && frames.dim(2) == e.in_channels && frames.dim(3) == e.height &&
                    frames.dim(4) == e.width,
                ErrorKind::config, "model expects [B, T, ", e.in_channels, ", ", e.height, ", ", e.width,
                "] input, got ", shape_str(frames.shape()));
    const std::size_t b = frames.dim(0), t = frames.dim(1), d = e.embed_dim;
    auto heads = encoder_->forward(reshape(frames, {b * t, e.in_channels, e.height, e.width}), mode);
    switch (cfg_.paradigm) {
        case Paradigm::esd: {
            Tensor agg = attention_->forward(reshape(heads[0], {b, t, d}), reshape(heads[1], {b, t, d}),
                                             reshape(heads[2], {b, t, d}));
            return decoder_->forward(agg, mode);
        }
        case Paradigm::eld:
            return decoder_->forward(lstm_->forward(reshape(heads[0], {b, t, d})), mode);
        case Paradigm::ed: {
            Tensor maps = decoder_->forward(heads[0], mode);
            return mean(reshape(maps, {b, t, maps.dim(1), maps.dim(2), maps.dim(3)}), 1);
        }
    }
    return {};
}

void SegmentationModel::set_normalization(const std::vector<double>& mean, const std::vector<double>& stddev) {
    SEPHR_CHECK(mean.size() == norm_mean_.numel() && stddev.size() == norm_std_.numel(), ErrorKind::config,
                "normalization statistics need ", norm_mean_.numel(), " bands");
    std::copy(mean.begin(), mean.end(), norm_mean_.mutable_values().begin());
    std::copy(stddev.begin(), stddev.end(), norm_std_.mutable_values().begin());
}

std::vector<double> SegmentationModel::norm_mean() const {
    return {norm_mean_.values().begin(), norm_mean_.values().end()};
}

std::vector<double> SegmentationModel::norm_std() const {
    return {norm_std_.values().begin(), norm_std_.values().end()};
}

void SegmentationModel::save(const std::string& path, const std::string& extra_metadata) const {
    TensorArchive archive;
    archive.metadata = cfg_.to_keyvalues().render() + extra_metadata;
    params_->export_to(archive);
    save_archive(path, archive);
}

SegmentationModel SegmentationModel::load(const std::string& path) {
    TensorArchive archive = load_archive(path);
    auto build = [&] {
        try {
            return SegmentationModel(ModelConfig::from_keyvalues(KeyValues::parse(archive.metadata)), 0);
        } catch (const Error& err) {
            detail::raise(ErrorKind::checkpoint_format, "checkpoint '", path, "' has an invalid configuration: ",
                          err.what());
        }
    };
    SegmentationModel model = build();
    model.params_->import_from(archive);
    model.metadata_ = std::move(archive.metadata);
    return model;
}

}  // namespace sephr
