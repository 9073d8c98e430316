#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "tensor/tensor.hpp"

namespace sephr {

// ---- elementwise ---------------------------------------------------------

// Binary ops broadcast NumPy-style (right-aligned extents, 1 stretches).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);

// ---- shape ---------------------------------------------------------------

Tensor reshape(const Tensor& x, Shape shape);
Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis);
// Half-open range [begin, end) along axis; the axis is kept.
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end);
// Swaps the last two axes.
Tensor transpose(const Tensor& x);

// ---- reductions ----------------------------------------------------------

Tensor sum(const Tensor& x, std::size_t axis);
Tensor mean(const Tensor& x, std::size_t axis);
Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);

// Max-subtracted softmax along axis.
Tensor softmax(const Tensor& x, std::size_t axis);

// ---- linear algebra ------------------------------------------------------

// a: [..., m, k]; b: [k, n] (shared) or [..., k, n] with a's leading extents.
Tensor matmul(const Tensor& a, const Tensor& b);
// x: [..., in]; weight: [in, out]; bias: [out] or undefined.
Tensor affine(const Tensor& x, const Tensor& weight, const Tensor& bias = {});

// ---- convolution ---------------------------------------------------------

struct Conv2dGeometry {
    std::size_t stride_h = 1, stride_w = 1;
    std::size_t pad_h = 0, pad_w = 0;

    static Conv2dGeometry uniform(std::size_t stride, std::size_t padding) {
        return {stride, stride, padding, padding};
    }
};

// Cross-correlation (no kernel flip).
// input: [C_in, H, W] or [N, C_in, H, W]; kernel: [C_out, C_in, kh, kw]; bias: [C_out] or undefined.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, Conv2dGeometry geom);
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias = {},
              std::size_t stride = 1, std::size_t padding = 0);

// k×1 pass (rows padded, vertical stride) followed by 1×k pass (columns padded,
// horizontal stride). w_row: [C_mid, C_in, k, 1]; w_col: [C_out, C_mid, 1, k].
Tensor separable_conv2d(const Tensor& input, const Tensor& w_row, const Tensor& w_col,
                        std::size_t stride = 1, std::size_t padding = 0, const Tensor& bias = {});

// Adjoint of conv2d with the same kernel tensor: kernel [C_in_t, C_out_t, kh, kw]
// maps C_in_t input channels to C_out_t outputs. Output extent (H-1)*s - 2p + k.
Tensor conv_transpose2d(const Tensor& input, const Tensor& kernel, const Tensor& bias = {},
                        std::size_t stride = 1, std::size_t padding = 0);

// [N, C, H, W] -> [N, C, H/k, W/k], non-overlapping windows.
Tensor avg_pool2d(const Tensor& x, std::size_t k);
// [N, C, H, W] -> [N, C, H*f, W*f].
Tensor upsample_nearest(const Tensor& x, std::size_t factor);
// [N, C, H, W] -> [N, C].
Tensor global_avg_pool(const Tensor& x);

// ---- normalization -------------------------------------------------------

enum class NormMode { train, eval };

// Learnable affine plus running statistics. running_* and batches_tracked are
// plain leaf tensors updated in place during train-mode forwards.
struct BatchNormParams {
    Tensor gamma, beta;
    Tensor running_mean, running_var;
    Tensor batches_tracked;  // scalar count; 0 means no statistics yet

    static BatchNormParams create(std::size_t channels);
};

struct BatchNormOptions {
    NormMode mode = NormMode::train;
    double momentum = 0.1;
    double eps = 1e-5;
};

// Normalizes axis 1 (channels) over every other axis. input rank >= 2.
Tensor batch_norm(const Tensor& input, BatchNormParams& params, BatchNormOptions opts = {});

// ---- loss ----------------------------------------------------------------

// logits: [K, H, W] or [N, K, H, W]; labels: one int per pixel in [0, K).
// Mean over pixels of -log softmax(true class), log floored at 1e-12.
Tensor cross_entropy(const Tensor& logits, std::span<const std::int32_t> labels);

}  // namespace sephr
