#include <cmath>
#include <memory>

#include "tensor/ops.hpp"

namespace sephr {

BatchNormParams BatchNormParams::create(std::size_t channels) {
    return {Tensor::full({channels}, 1.0, true), Tensor::zeros({channels}, true), Tensor::zeros({channels}),
            Tensor::full({channels}, 1.0), Tensor::zeros({1})};
}

Tensor batch_norm(const Tensor& input, BatchNormParams& params, BatchNormOptions opts) {
    SEPHR_CHECK(input.rank() >= 2, ErrorKind::config, "batch_norm: input needs a channel axis, got ",
                shape_str(input.shape()));
    const std::size_t batch = input.dim(0), channels = input.dim(1);
    SEPHR_CHECK(params.gamma.numel() == channels && params.beta.numel() == channels, ErrorKind::config,
                "batch_norm: input ", shape_str(input.shape()), " has ", channels, " channels but gamma/beta hold ",
                params.gamma.numel(), "/", params.beta.numel());
    const std::size_t inner = input.numel() / (batch * channels);
    const double count = static_cast<double>(batch * inner);
    const auto xv = input.values();
    const auto gamma = params.gamma.values();
    const auto beta = params.beta.values();

    auto xhat = std::make_shared<std::vector<double>>(input.numel());
    auto inv_std = std::make_shared<std::vector<double>>(channels);
    auto at = [&](std::size_t n, std::size_t c, std::size_t i) { return (n * channels + c) * inner + i; };

    const bool train = opts.mode == NormMode::train;
    if (train) {
        auto rm = params.running_mean.mutable_values();
        auto rv = params.running_var.mutable_values();
        auto tracked = params.batches_tracked.mutable_values();
        const bool first = tracked[0] == 0.0;
        for (std::size_t c = 0; c < channels; ++c) {
            double mu = 0.0;
            for (std::size_t n = 0; n < batch; ++n)
                for (std::size_t i = 0; i < inner; ++i) mu += xv[at(n, c, i)];
            mu /= count;
            double var = 0.0;
            for (std::size_t n = 0; n < batch; ++n)
                for (std::size_t i = 0; i < inner; ++i) {
                    const double d = xv[at(n, c, i)] - mu;
                    var += d * d;
                }
            var /= count;
            (*inv_std)[c] = 1.0 / std::sqrt(var + opts.eps);
            for (std::size_t n = 0; n < batch; ++n)
                for (std::size_t i = 0; i < inner; ++i)
                    (*xhat)[at(n, c, i)] = (xv[at(n, c, i)] - mu) * (*inv_std)[c];
            const double unbiased = count > 1.0 ? var * count / (count - 1.0) : var;
            if (first) {
                rm[c] = mu;
                rv[c] = unbiased;
            } else {
                rm[c] = (1.0 - opts.momentum) * rm[c] + opts.momentum * mu;
                rv[c] = (1.0 - opts.momentum) * rv[c] + opts.momentum * unbiased;
            }
        }
        tracked[0] += 1.0;
    } else {
        SEPHR_CHECK(params.batches_tracked.values()[0] > 0.0, ErrorKind::state,
                    "batch_norm: eval mode requested but no running statistics have been recorded");
        const auto rm = params.running_mean.values();
        const auto rv = params.running_var.values();
        for (std::size_t c = 0; c < channels; ++c) {
            (*inv_std)[c] = 1.0 / std::sqrt(rv[c] + opts.eps);
            for (std::size_t n = 0; n < batch; ++n)
                for (std::size_t i = 0; i < inner; ++i)
                    (*xhat)[at(n, c, i)] = (xv[at(n, c, i)] - rm[c]) * (*inv_std)[c];
        }
    }

    std::vector<double> out(input.numel());
    for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t c = 0; c < channels; ++c)
            for (std::size_t i = 0; i < inner; ++i) {
                const auto k = at(n, c, i);
                out[k] = gamma[c] * (*xhat)[k] + beta[c];
            }

    return Tensor::make_result(
        input.shape(), std::move(out), {input, params.gamma, params.beta},
        [xhat, inv_std, batch, channels, inner, count, train](detail::Node& self) {
            auto& nx = *self.inputs[0];
            auto& ng = *self.inputs[1];
            auto& nb = *self.inputs[2];
            const auto& dy = self.grad;
            auto at = [&](std::size_t n, std::size_t c, std::size_t i) { return (n * channels + c) * inner + i; };
            for (std::size_t c = 0; c < channels; ++c) {
                double sum_dy = 0.0, sum_dy_xhat = 0.0;
                for (std::size_t n = 0; n < batch; ++n)
                    for (std::size_t i = 0; i < inner; ++i) {
                        const auto k = at(n, c, i);
                        sum_dy += dy[k];
                        sum_dy_xhat += dy[k] * (*xhat)[k];
                    }
                if (ng.requires_grad) ng.ensure_grad()[c] += sum_dy_xhat;
                if (nb.requires_grad) nb.ensure_grad()[c] += sum_dy;
                if (!nx.requires_grad) continue;
                auto gx = nx.ensure_grad();
                const double scale = ng.value[c] * (*inv_std)[c];
                const double mean_dy = sum_dy / count, mean_dy_xhat = sum_dy_xhat / count;
                for (std::size_t n = 0; n < batch; ++n)
                    for (std::size_t i = 0; i < inner; ++i) {
                        const auto k = at(n, c, i);
                        gx[k] += train ? scale * (dy[k] - mean_dy - (*xhat)[k] * mean_dy_xhat) : scale * dy[k];
                    }
            }
        });
}

}  // namespace sephr
