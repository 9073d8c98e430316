#pragma once

// Independent reference implementations used by the unit and acceptance
// suites. Plain loops over std::vector, no code shared with the engine.

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <vector>

namespace oracle {

struct Image {
    std::size_t c = 0, h = 0, w = 0;
    std::vector<double> v;

    double at(std::size_t ci, std::ptrdiff_t y, std::ptrdiff_t x) const {
        if (y < 0 || x < 0 || y >= static_cast<std::ptrdiff_t>(h) || x >= static_cast<std::ptrdiff_t>(w)) return 0.0;
        return v[(ci * h + static_cast<std::size_t>(y)) * w + static_cast<std::size_t>(x)];
    }
};

struct Kernel {
    std::size_t co = 0, ci = 0, kh = 0, kw = 0;
    std::vector<double> v;

    double at(std::size_t o, std::size_t i, std::size_t y, std::size_t x) const {
        return v[((o * ci + i) * kh + y) * kw + x];
    }
};

inline std::vector<double> random_values(std::size_t n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

// Direct six-nested-loop cross-correlation.
inline Image conv2d(const Image& in, const Kernel& k, std::size_t sh, std::size_t sw, std::size_t ph,
                    std::size_t pw) {
    Image out;
    out.c = k.co;
    out.h = (in.h + 2 * ph - k.kh) / sh + 1;
    out.w = (in.w + 2 * pw - k.kw) / sw + 1;
    out.v.assign(out.c * out.h * out.w, 0.0);
    for (std::size_t o = 0; o < k.co; ++o)
        for (std::size_t y = 0; y < out.h; ++y)
            for (std::size_t x = 0; x < out.w; ++x) {
                double s = 0.0;
                for (std::size_t i = 0; i < k.ci; ++i)
                    for (std::size_t m = 0; m < k.kh; ++m)
                        for (std::size_t n = 0; n < k.kw; ++n)
                            s += in.at(i, static_cast<std::ptrdiff_t>(y * sh + m) - static_cast<std::ptrdiff_t>(ph),
                                       static_cast<std::ptrdiff_t>(x * sw + n) - static_cast<std::ptrdiff_t>(pw)) *
                                 k.at(o, i, m, n);
                out.v[(o * out.h + y) * out.w + x] = s;
            }
    return out;
}

// Transposed convolution by zero insertion: stuff (stride-1) zeros between
// input pixels, pad by k-1-p, and cross-correlate with the spatially flipped,
// channel-swapped kernel. Kernel layout follows conv2d: [C_in_t, C_out_t, kh, kw].
inline Image conv_transpose2d_zero_stuffing(const Image& in, const Kernel& k, std::size_t stride, std::size_t pad) {
    Image stuffed;
    stuffed.c = in.c;
    stuffed.h = (in.h - 1) * stride + 1;
    stuffed.w = (in.w - 1) * stride + 1;
    stuffed.v.assign(stuffed.c * stuffed.h * stuffed.w, 0.0);
    for (std::size_t c = 0; c < in.c; ++c)
        for (std::size_t y = 0; y < in.h; ++y)
            for (std::size_t x = 0; x < in.w; ++x)
                stuffed.v[(c * stuffed.h + y * stride) * stuffed.w + x * stride] = in.v[(c * in.h + y) * in.w + x];
    Kernel flipped;
    flipped.co = k.ci;
    flipped.ci = k.co;
    flipped.kh = k.kh;
    flipped.kw = k.kw;
    flipped.v.resize(k.v.size());
    for (std::size_t a = 0; a < k.co; ++a)
        for (std::size_t b = 0; b < k.ci; ++b)
            for (std::size_t m = 0; m < k.kh; ++m)
                for (std::size_t n = 0; n < k.kw; ++n)
                    flipped.v[((b * flipped.ci + a) * k.kh + (k.kh - 1 - m)) * k.kw + (k.kw - 1 - n)] = k.at(a, b, m, n);
    return conv2d(stuffed, flipped, 1, 1, k.kh - 1 - pad, k.kw - 1 - pad);
}

inline std::vector<double> matmul(const std::vector<double>& a, const std::vector<double>& b, std::size_t m,
                                  std::size_t k, std::size_t n) {
    std::vector<double> c(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t t = 0; t < k; ++t) s += a[i * k + t] * b[t * n + j];
            c[i * n + j] = s;
        }
    return c;
}

inline std::vector<double> row_softmax(const std::vector<double>& x, std::size_t rows, std::size_t cols) {
    std::vector<double> y(x.size());
    for (std::size_t r = 0; r < rows; ++r) {
        double mx = x[r * cols];
        for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, x[r * cols + c]);
        double s = 0.0;
        for (std::size_t c = 0; c < cols; ++c) s += std::exp(x[r * cols + c] - mx);
        for (std::size_t c = 0; c < cols; ++c) y[r * cols + c] = std::exp(x[r * cols + c] - mx) / s;
    }
    return y;
}

// softmax(Q K^T / sqrt(d)) V for T x d row-major matrices.
inline std::vector<double> attention(const std::vector<double>& q, const std::vector<double>& k,
                                     const std::vector<double>& v, std::size_t t, std::size_t d) {
    std::vector<double> scores(t * t);
    for (std::size_t i = 0; i < t; ++i)
        for (std::size_t j = 0; j < t; ++j) {
            double s = 0.0;
            for (std::size_t c = 0; c < d; ++c) s += q[i * d + c] * k[j * d + c];
            scores[i * t + j] = s / std::sqrt(static_cast<double>(d));
        }
    return matmul(row_softmax(scores, t, t), v, t, t, d);
}

// Pixel-tally confusion matrix, rows = truth, cols = prediction.
inline std::vector<std::vector<std::uint64_t>> confusion(const std::vector<std::int32_t>& pred,
                                                         const std::vector<std::int32_t>& truth, std::size_t k) {
    std::vector<std::vector<std::uint64_t>> m(k, std::vector<std::uint64_t>(k, 0));
    for (std::size_t p = 0; p < pred.size(); ++p)
        for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b = 0; b < k; ++b)
                if (truth[p] == static_cast<std::int32_t>(a) && pred[p] == static_cast<std::int32_t>(b)) ++m[a][b];
    return m;
}

}  // namespace oracle
