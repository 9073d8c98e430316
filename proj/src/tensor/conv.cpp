#include <algorithm>
#include <cstdint>

#include "tensor/eigen.hpp"
#include "tensor/ops.hpp"
#include "tensor/parallel.hpp"

namespace sephr {

namespace {

struct Plane {
    std::size_t channels, height, width;
};

struct ConvDims {
    std::size_t batch;
    bool batched;  // input was rank 4
    Plane in, out;
    std::size_t kh, kw;
    Conv2dGeometry geom;

    std::size_t col_rows() const { return in.channels * kh * kw; }
};

// Unfolds one [C, H, W] image into [(C*kh*kw), (Ho*Wo)] patches.
void im2col(const double* x, const Plane& in, std::size_t kh, std::size_t kw, const Conv2dGeometry& g,
            std::size_t out_h, std::size_t out_w, double* col) {
    const std::size_t plane = out_h * out_w;
    for (std::size_t c = 0; c < in.channels; ++c) {
        for (std::size_t ki = 0; ki < kh; ++ki) {
            for (std::size_t kj = 0; kj < kw; ++kj) {
                double* row = col + ((c * kh + ki) * kw + kj) * plane;
                for (std::size_t oh = 0; oh < out_h; ++oh) {
                    const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride_h + ki) -
                                    static_cast<std::ptrdiff_t>(g.pad_h);
                    double* dst = row + oh * out_w;
                    if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(in.height)) {
                        std::fill_n(dst, out_w, 0.0);
                        continue;
                    }
                    const double* src = x + (c * in.height + static_cast<std::size_t>(ih)) * in.width;
                    for (std::size_t ow = 0; ow < out_w; ++ow) {
                        const auto iw = static_cast<std::ptrdiff_t>(ow * g.stride_w + kj) -
                                        static_cast<std::ptrdiff_t>(g.pad_w);
                        dst[ow] = (iw < 0 || iw >= static_cast<std::ptrdiff_t>(in.width)) ? 0.0 : src[iw];
                    }
                }
            }
        }
    }
}

// Adjoint of im2col: scatter-adds patches back into a [C, H, W] image.
void col2im(const double* col, const Plane& in, std::size_t kh, std::size_t kw, const Conv2dGeometry& g,
            std::size_t out_h, std::size_t out_w, double* x) {
    const std::size_t plane = out_h * out_w;
    for (std::size_t c = 0; c < in.channels; ++c) {
        for (std::size_t ki = 0; ki < kh; ++ki) {
            for (std::size_t kj = 0; kj < kw; ++kj) {
                const double* row = col + ((c * kh + ki) * kw + kj) * plane;
                for (std::size_t oh = 0; oh < out_h; ++oh) {
                    const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride_h + ki) -
                                    static_cast<std::ptrdiff_t>(g.pad_h);
                    if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(in.height)) continue;
                    double* dst = x + (c * in.height + static_cast<std::size_t>(ih)) * in.width;
                    const double* src = row + oh * out_w;
                    for (std::size_t ow = 0; ow < out_w; ++ow) {
                        const auto iw = static_cast<std::ptrdiff_t>(ow * g.stride_w + kj) -
                                        static_cast<std::ptrdiff_t>(g.pad_w);
                        if (iw >= 0 && iw < static_cast<std::ptrdiff_t>(in.width)) dst[iw] += src[ow];
                    }
                }
            }
        }
    }
}

bool is_pointwise(const ConvDims& d) {
    return d.kh == 1 && d.kw == 1 && d.geom.stride_h == 1 && d.geom.stride_w == 1 && d.geom.pad_h == 0 &&
           d.geom.pad_w == 0;
}

void check_bias(const Tensor& bias, std::size_t channels, const char* op) {
    if (!bias.defined()) return;
    SEPHR_CHECK(bias.rank() == 1 && bias.dim(0) == channels, ErrorKind::config, op, ": bias ",
                shape_str(bias.shape()), " does not match ", channels, " output channels");
}

void add_bias(std::vector<double>& out, const Tensor& bias, std::size_t batch, std::size_t channels,
              std::size_t plane) {
    if (!bias.defined()) return;
    const auto bv = bias.values();
    for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t c = 0; c < channels; ++c) {
            double* p = out.data() + (n * channels + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) p[i] += bv[c];
        }
}

void bias_grad(detail::Node& bias, const std::vector<double>& grad, std::size_t batch, std::size_t channels,
               std::size_t plane) {
    auto gb = bias.ensure_grad();
    for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t c = 0; c < channels; ++c) {
            const double* p = grad.data() + (n * channels + c) * plane;
            double s = 0.0;
            for (std::size_t i = 0; i < plane; ++i) s += p[i];
            gb[c] += s;
        }
}

// Per-sample kernel-gradient partials reduced in sample order.
void reduce_partials(std::span<double> dst, const std::vector<std::vector<double>>& partials) {
    for (const auto& p : partials)
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += p[i];
}

Shape with_batch(bool batched, std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return batched ? Shape{n, c, h, w} : Shape{c, h, w};
}

ConvDims input_dims(const Tensor& input, const char* op) {
    SEPHR_CHECK(input.rank() == 3 || input.rank() == 4, ErrorKind::config, op,
                ": input must be [C,H,W] or [N,C,H,W], got ", shape_str(input.shape()));
    ConvDims d{};
    d.batched = input.rank() == 4;
    const std::size_t o = d.batched ? 1 : 0;
    d.batch = d.batched ? input.dim(0) : 1;
    d.in = {input.dim(o), input.dim(o + 1), input.dim(o + 2)};
    return d;
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride,
              std::size_t padding) {
    return conv2d(input, kernel, bias, Conv2dGeometry::uniform(stride, padding));
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, Conv2dGeometry geom) {
    ConvDims d = input_dims(input, "conv2d");
    SEPHR_CHECK(kernel.rank() == 4, ErrorKind::config, "conv2d: kernel must be [C_out,C_in,kh,kw], got ",
                shape_str(kernel.shape()));
    SEPHR_CHECK(kernel.dim(1) == d.in.channels, ErrorKind::config, "conv2d: kernel ", shape_str(kernel.shape()),
                " expects ", kernel.dim(1), " input channels but input ", shape_str(input.shape()), " has ",
                d.in.channels);
    SEPHR_CHECK(geom.stride_h >= 1 && geom.stride_w >= 1, ErrorKind::config, "conv2d: stride must be >= 1");
    d.kh = kernel.dim(2);
    d.kw = kernel.dim(3);
    d.geom = geom;
    SEPHR_CHECK(d.kh <= d.in.height + 2 * geom.pad_h && d.kw <= d.in.width + 2 * geom.pad_w, ErrorKind::config,
                "conv2d: kernel ", shape_str(kernel.shape()), " larger than padded input ", shape_str(input.shape()));
    d.out = {kernel.dim(0), (d.in.height + 2 * geom.pad_h - d.kh) / geom.stride_h + 1,
             (d.in.width + 2 * geom.pad_w - d.kw) / geom.stride_w + 1};
    check_bias(bias, d.out.channels, "conv2d");

    const std::size_t in_size = d.in.channels * d.in.height * d.in.width;
    const std::size_t plane = d.out.height * d.out.width;
    const std::size_t out_size = d.out.channels * plane;
    const bool pointwise = is_pointwise(d);
    std::vector<double> out(d.batch * out_size);
    const double* xv = input.values().data();
    const double* kv = kernel.values().data();
    parallel_for(d.batch, [&](std::size_t n) {
        std::vector<double> col;
        const double* cols = xv + n * in_size;
        if (!pointwise) {
            col.resize(d.col_rows() * plane);
            im2col(xv + n * in_size, d.in, d.kh, d.kw, d.geom, d.out.height, d.out.width, col.data());
            cols = col.data();
        }
        eig::Map(out.data() + n * out_size, d.out.channels, plane).noalias() =
            eig::CMap(kv, d.out.channels, d.col_rows()) * eig::CMap(cols, d.col_rows(), plane);
    });
    add_bias(out, bias, d.batch, d.out.channels, plane);

    std::vector<Tensor> inputs{input, kernel};
    if (bias.defined()) inputs.push_back(bias);
    return Tensor::make_result(
        with_batch(d.batched, d.batch, d.out.channels, d.out.height, d.out.width), std::move(out),
        std::move(inputs), [d, in_size, plane, out_size, pointwise](detail::Node& self) {
            auto& nx = *self.inputs[0];
            auto& nk = *self.inputs[1];
            const std::size_t rows = d.col_rows();
            std::vector<std::vector<double>> dk_partial(nk.requires_grad ? d.batch : 0);
            double* dx = nx.requires_grad ? nx.ensure_grad().data() : nullptr;
            parallel_for(d.batch, [&](std::size_t n) {
                auto dy = eig::CMap(self.grad.data() + n * out_size, d.out.channels, plane);
                std::vector<double> col;
                const double* cols = nx.value.data() + n * in_size;
                if (!pointwise && nk.requires_grad) {
                    col.resize(rows * plane);
                    im2col(nx.value.data() + n * in_size, d.in, d.kh, d.kw, d.geom, d.out.height, d.out.width,
                           col.data());
                    cols = col.data();
                }
                if (nk.requires_grad) {
                    dk_partial[n].resize(d.out.channels * rows);
                    eig::Map(dk_partial[n].data(), d.out.channels, rows).noalias() =
                        dy * eig::CMap(cols, rows, plane).transpose();
                }
                if (dx) {
                    auto kmat = eig::CMap(nk.value.data(), d.out.channels, rows);
                    if (pointwise) {
                        eig::Map(dx + n * in_size, rows, plane).noalias() += kmat.transpose() * dy;
                    } else {
                        std::vector<double> dcol(rows * plane);
                        eig::Map(dcol.data(), rows, plane).noalias() = kmat.transpose() * dy;
                        col2im(dcol.data(), d.in, d.kh, d.kw, d.geom, d.out.height, d.out.width, dx + n * in_size);
                    }
                }
            });
            if (nk.requires_grad) reduce_partials(nk.ensure_grad(), dk_partial);
            if (self.inputs.size() > 2 && self.inputs[2]->requires_grad)
                bias_grad(*self.inputs[2], self.grad, d.batch, d.out.channels, plane);
        });
}

Tensor separable_conv2d(const Tensor& input, const Tensor& w_row, const Tensor& w_col, std::size_t stride,
                        std::size_t padding, const Tensor& bias) {
    SEPHR_CHECK(w_row.rank() == 4 && w_row.dim(3) == 1, ErrorKind::config,
                "separable_conv2d: w_row must be [C_mid,C_in,k,1], got ", shape_str(w_row.shape()));
    SEPHR_CHECK(w_col.rank() == 4 && w_col.dim(2) == 1, ErrorKind::config,
                "separable_conv2d: w_col must be [C_out,C_mid,1,k], got ", shape_str(w_col.shape()));
    SEPHR_CHECK(w_col.dim(1) == w_row.dim(0), ErrorKind::config, "separable_conv2d: channel chain broken, w_row ",
                shape_str(w_row.shape()), " produces ", w_row.dim(0), " channels but w_col ",
                shape_str(w_col.shape()), " consumes ", w_col.dim(1));
    const Tensor vertical = conv2d(input, w_row, {}, Conv2dGeometry{stride, 1, padding, 0});
    return conv2d(vertical, w_col, bias, Conv2dGeometry{1, stride, 0, padding});
}

Tensor conv_transpose2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride,
                        std::size_t padding) {
    ConvDims d = input_dims(input, "conv_transpose2d");
    SEPHR_CHECK(stride >= 1, ErrorKind::config, "conv_transpose2d: stride must be >= 1");
    SEPHR_CHECK(kernel.rank() == 4 && kernel.dim(0) == d.in.channels, ErrorKind::config,
                "conv_transpose2d: kernel ", shape_str(kernel.shape()), " does not take ", d.in.channels,
                " input channels of ", shape_str(input.shape()));
    d.kh = kernel.dim(2);
    d.kw = kernel.dim(3);
    d.geom = Conv2dGeometry::uniform(stride, padding);
    const auto extent = [&](std::size_t in, std::size_t k) {
        const auto e = static_cast<std::ptrdiff_t>((in - 1) * stride + k) - 2 * static_cast<std::ptrdiff_t>(padding);
        SEPHR_CHECK(e > 0, ErrorKind::config, "conv_transpose2d: output extent (", in, "-1)*", stride, " - 2*",
                    padding, " + ", k, " = ", e, " is not positive");
        return static_cast<std::size_t>(e);
    };
    d.out = {kernel.dim(1), extent(d.in.height, d.kh), extent(d.in.width, d.kw)};
    check_bias(bias, d.out.channels, "conv_transpose2d");

    // In conv2d terms the output plane is the "input" and our input the "output".
    const std::size_t in_plane = d.in.height * d.in.width;
    const std::size_t in_size = d.in.channels * in_plane;
    const std::size_t out_plane = d.out.height * d.out.width;
    const std::size_t out_size = d.out.channels * out_plane;
    const std::size_t rows = d.out.channels * d.kh * d.kw;
    std::vector<double> out(d.batch * out_size, 0.0);
    const double* xv = input.values().data();
    const double* kv = kernel.values().data();
    parallel_for(d.batch, [&](std::size_t n) {
        std::vector<double> col(rows * in_plane);
        eig::Map(col.data(), rows, in_plane).noalias() =
            eig::CMap(kv, d.in.channels, rows).transpose() * eig::CMap(xv + n * in_size, d.in.channels, in_plane);
        col2im(col.data(), d.out, d.kh, d.kw, d.geom, d.in.height, d.in.width, out.data() + n * out_size);
    });
    add_bias(out, bias, d.batch, d.out.channels, out_plane);

    std::vector<Tensor> inputs{input, kernel};
    if (bias.defined()) inputs.push_back(bias);
    return Tensor::make_result(
        with_batch(d.batched, d.batch, d.out.channels, d.out.height, d.out.width), std::move(out),
        std::move(inputs), [d, in_plane, in_size, out_plane, out_size, rows](detail::Node& self) {
            auto& nx = *self.inputs[0];
            auto& nk = *self.inputs[1];
            std::vector<std::vector<double>> dk_partial(nk.requires_grad ? d.batch : 0);
            double* dx = nx.requires_grad ? nx.ensure_grad().data() : nullptr;
            parallel_for(d.batch, [&](std::size_t n) {
                std::vector<double> col(rows * in_plane);
                im2col(self.grad.data() + n * out_size, d.out, d.kh, d.kw, d.geom, d.in.height, d.in.width,
                       col.data());
                auto colm = eig::CMap(col.data(), rows, in_plane);
                if (dx)
                    eig::Map(dx + n * in_size, d.in.channels, in_plane).noalias() +=
                        eig::CMap(nk.value.data(), d.in.channels, rows) * colm;
                if (nk.requires_grad) {
                    dk_partial[n].resize(d.in.channels * rows);
                    eig::Map(dk_partial[n].data(), d.in.channels, rows).noalias() =
                        eig::CMap(nx.value.data() + n * in_size, d.in.channels, in_plane) * colm.transpose();
                }
            });
            if (nk.requires_grad) reduce_partials(nk.ensure_grad(), dk_partial);
            if (self.inputs.size() > 2 && self.inputs[2]->requires_grad)
                bias_grad(*self.inputs[2], self.grad, d.batch, d.out.channels, out_plane);
        });
}

Tensor avg_pool2d(const Tensor& x, std::size_t k) {
    SEPHR_CHECK(x.rank() == 4, ErrorKind::config, "avg_pool2d: expected [N,C,H,W], got ", shape_str(x.shape()));
    const std::size_t nc = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
    SEPHR_CHECK(k >= 1 && h % k == 0 && w % k == 0, ErrorKind::config, "avg_pool2d: window ", k,
                " does not tile ", shape_str(x.shape()));
    const std::size_t oh = h / k, ow = w / k;
    const double inv = 1.0 / static_cast<double>(k * k);
    const auto xv = x.values();
    std::vector<double> out(nc * oh * ow, 0.0);
    for (std::size_t p = 0; p < nc; ++p)
        for (std::size_t i = 0; i < h; ++i)
            for (std::size_t j = 0; j < w; ++j) out[(p * oh + i / k) * ow + j / k] += xv[(p * h + i) * w + j] * inv;
    return Tensor::make_result({x.dim(0), x.dim(1), oh, ow}, std::move(out), {x},
                               [nc, h, w, k, oh, ow, inv](detail::Node& self) {
                                   auto g = self.inputs[0]->ensure_grad();
                                   for (std::size_t p = 0; p < nc; ++p)
                                       for (std::size_t i = 0; i < h; ++i)
                                           for (std::size_t j = 0; j < w; ++j)
                                               g[(p * h + i) * w + j] += self.grad[(p * oh + i / k) * ow + j / k] * inv;
                               });
}

Tensor upsample_nearest(const Tensor& x, std::size_t factor) {
    SEPHR_CHECK(x.rank() == 4, ErrorKind::config, "upsample_nearest: expected [N,C,H,W], got ",
                shape_str(x.shape()));
    SEPHR_CHECK(factor >= 1, ErrorKind::config, "upsample_nearest: factor must be >= 1");
    const std::size_t nc = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::size_t oh = h * factor, ow = w * factor;
    const auto xv = x.values();
    std::vector<double> out(nc * oh * ow);
    for (std::size_t p = 0; p < nc; ++p)
        for (std::size_t i = 0; i < oh; ++i)
            for (std::size_t j = 0; j < ow; ++j) out[(p * oh + i) * ow + j] = xv[(p * h + i / factor) * w + j / factor];
    return Tensor::make_result({x.dim(0), x.dim(1), oh, ow}, std::move(out), {x},
                               [nc, h, w, oh, ow, factor](detail::Node& self) {
                                   auto g = self.inputs[0]->ensure_grad();
                                   for (std::size_t p = 0; p < nc; ++p)
                                       for (std::size_t i = 0; i < oh; ++i)
                                           for (std::size_t j = 0; j < ow; ++j)
                                               g[(p * h + i / factor) * w + j / factor] +=
                                                   self.grad[(p * oh + i) * ow + j];
                               });
}

Tensor global_avg_pool(const Tensor& x) {
    SEPHR_CHECK(x.rank() == 4, ErrorKind::config, "global_avg_pool: expected [N,C,H,W], got ",
                shape_str(x.shape()));
    return mean(reshape(x, {x.dim(0), x.dim(1), x.dim(2) * x.dim(3)}), 2);
}

}  // namespace sephr
