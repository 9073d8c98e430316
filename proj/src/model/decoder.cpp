#include "model/decoder.hpp"

#include <sstream>

namespace sephr {

std::vector<long> DecoderConfig::extent_chain() const {
    std::vector<long> chain{static_cast<long>(seed_extent)};
    for (const auto& b : blocks)
        chain.push_back((chain.back() - 1) * static_cast<long>(b.stride) - 2 * static_cast<long>(b.padding) +
                        static_cast<long>(b.kernel));
    return chain;
}

void DecoderConfig::validate(std::size_t embed_dim) const {
    SEPHR_CHECK(seed_channels >= 1 && seed_extent >= 1, ErrorKind::config, "decoder seed must be non-empty");
    SEPHR_CHECK(seed_channels * seed_extent * seed_extent == embed_dim, ErrorKind::config, "decoder seed ",
                seed_channels, "x", seed_extent, "x", seed_extent, " holds ", seed_channels * seed_extent * seed_extent,
                " values, the aggregated vector has ", embed_dim);
    SEPHR_CHECK(!blocks.empty(), ErrorKind::config, "decoder needs at least one block");
    SEPHR_CHECK(n_classes >= 2, ErrorKind::config, "decoder needs at least two classes");
    SEPHR_CHECK(blocks.back().out_channels == n_classes, ErrorKind::config, "last decoder block emits ",
                blocks.back().out_channels, " channels for ", n_classes, " classes");
    for (const auto& b : blocks)
        SEPHR_CHECK(b.out_channels >= 1 && b.kernel >= 1 && b.stride >= 1, ErrorKind::config,
                    "decoder blocks need positive channels, kernel and stride");
    SEPHR_CHECK(height == width, ErrorKind::config, "decoder output must be square, got ", height, "x", width);
    const auto chain = extent_chain();
    bool ok = chain.back() == static_cast<long>(height);
    for (auto e : chain) ok = ok && e > 0;
    if (!ok) {
        std::ostringstream os;
        for (std::size_t i = 0; i < chain.size(); ++i) os << (i ? " -> " : "") << chain[i];
        detail::raise(ErrorKind::config, "decoder extent chain ", os.str(), " does not reach the target ", height);
    }
}

Decoder::Decoder(const DecoderConfig& cfg, std::size_t embed_dim, ParamScope scope)
    : cfg_(cfg), embed_dim_(embed_dim) {
    cfg_.validate(embed_dim);
    const std::size_t before = scope.count();
    std::size_t c_in = cfg_.seed_channels;
    for (std::size_t i = 0; i < cfg_.blocks.size(); ++i) {
        const auto& spec = cfg_.blocks[i];
        const std::string name = "block" + std::to_string(i);
        const bool last = i + 1 == cfg_.blocks.size();
        const std::size_t taps = std::max<std::size_t>(1, c_in * spec.kernel * spec.kernel / (spec.stride * spec.stride));
        Block b;
        b.spec = spec;
        b.kernel = scope.weight(name + ".weight", {c_in, spec.out_channels, spec.kernel, spec.kernel}, taps,
                                last ? 1.0 : 2.0);
        b.bias = scope.zeros(name + ".bias", {spec.out_channels});
        if (!last) b.bn = scope.batch_norm(name + ".bn", spec.out_channels);
        blocks_.push_back(std::move(b));
        c_in = spec.out_channels;
    }
    param_count_ = scope.count() - before;
}

Tensor Decoder::forward(const Tensor& agg, NormMode mode) {
    const bool single = agg.rank() == 1;
    SEPHR_CHECK((single || agg.rank() == 2) && agg.dim(agg.rank() - 1) == embed_dim_, ErrorKind::config,
                "decoder expects [B, ", embed_dim_, "] input, got ", shape_str(agg.shape()));
    const std::size_t n = single ? 1 : agg.dim(0);
    Tensor x = reshape(agg, {n, cfg_.seed_channels, cfg_.seed_extent, cfg_.seed_extent});
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        auto& b = blocks_[i];
        x = conv_transpose2d(x, b.kernel, b.bias, b.spec.stride, b.spec.padding);
        if (i + 1 < blocks_.size()) x = relu(batch_norm(x, b.bn, {mode, cfg_.bn_momentum}));
    }
    if (single) x = reshape(x, {x.dim(1), x.dim(2), x.dim(3)});
    return x;
}

std::vector<std::int32_t> argmax_labels(const Tensor& logits) {
    SEPHR_CHECK(logits.rank() == 3 || logits.rank() == 4, ErrorKind::config,
                "argmax expects [K, H, W] or [N, K, H, W] logits, got ", shape_str(logits.shape()));
    const std::size_t n = logits.rank() == 4 ? logits.dim(0) : 1;
    const std::size_t off = logits.rank() - 3;
    const std::size_t k = logits.dim(off), hw = logits.dim(off + 1) * logits.dim(off + 2);
    const auto v = logits.values();
    std::vector<std::int32_t> out(n * hw);
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t p = 0; p < hw; ++p) {
            std::size_t best = 0;
            double bv = v[s * k * hw + p];
            for (std::size_t c = 1; c < k; ++c) {
                const double x = v[(s * k + c) * hw + p];
                if (x > bv) {
                    bv = x;
                    best = c;
                }
            }
            out[s * hw + p] = static_cast<std::int32_t>(best);
        }
    return out;
}

}  // namespace sephr
