#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <sstream>

#include "support/oracles.hpp"
#include "tensor/grad_check.hpp"
#include "tensor/ops.hpp"
#include "tensor/parallel.hpp"
#include "tensor/parameters.hpp"
#include "tensor/serialize.hpp"

using namespace sephr;

namespace {

Tensor rand_tensor(Shape shape, std::mt19937_64& rng, bool grad = false) {
    auto v = oracle::random_values(shape_numel(shape), rng);
    return Tensor::from(std::move(shape), std::move(v), grad);
}

oracle::Image as_image(const Tensor& t) {
    return {t.dim(0), t.dim(1), t.dim(2), {t.values().begin(), t.values().end()}};
}

oracle::Kernel as_kernel(const Tensor& t) {
    return {t.dim(0), t.dim(1), t.dim(2), t.dim(3), {t.values().begin(), t.values().end()}};
}

double inner(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

void expect_near_all(std::span<const double> got, const std::vector<double>& want, double tol) {
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(got[i], want[i], tol) << "index " << i;
}

}  // namespace

TEST(Conv2d, IdentityKernelReturnsInput) {
    std::mt19937_64 rng(1);
    auto x = rand_tensor({1, 3, 3}, rng);
    auto y = conv2d(x, Tensor::full({1, 1, 1, 1}, 1.0));
    ASSERT_EQ(y.shape(), x.shape());
    expect_near_all(y.values(), {x.values().begin(), x.values().end()}, 0.0);
}

TEST(Conv2d, SumKernel) {
    auto x = Tensor::from({1, 2, 2}, {1, 2, 3, 4});
    auto y = conv2d(x, Tensor::full({1, 1, 2, 2}, 1.0));
    ASSERT_EQ(y.shape(), (Shape{1, 1, 1}));
    EXPECT_EQ(y.item(), 10.0);
}

TEST(Conv2d, MatchesNestedLoopOracle) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        std::mt19937_64 rng(seed);
        auto x = rand_tensor({2, 5, 5}, rng);
        auto k = rand_tensor({3, 2, 3, 3}, rng);
        for (std::size_t stride : {1, 2})
            for (std::size_t pad : {0, 1, 2}) {
                auto y = conv2d(x, k, {}, stride, pad);
                auto want = oracle::conv2d(as_image(x), as_kernel(k), stride, stride, pad, pad);
                ASSERT_EQ(y.shape(), (Shape{want.c, want.h, want.w}));
                expect_near_all(y.values(), want.v, 1e-6);
            }
    }
}

TEST(Conv2d, BatchedEqualsPerSample) {
    std::mt19937_64 rng(3);
    auto x = rand_tensor({3, 2, 6, 5}, rng);
    auto k = rand_tensor({4, 2, 3, 2}, rng);
    auto b = rand_tensor({4}, rng);
    auto y = conv2d(x, k, b, Conv2dGeometry{2, 1, 1, 0});
    for (std::size_t n = 0; n < 3; ++n) {
        auto xn = reshape(slice(x, 0, n, n + 1), {2, 6, 5});
        auto yn = conv2d(xn, k, b, Conv2dGeometry{2, 1, 1, 0});
        auto want = std::vector<double>(yn.values().begin(), yn.values().end());
        expect_near_all(slice(y, 0, n, n + 1).values(), want, 0.0);
    }
}

TEST(Conv2d, ChannelMismatchNamesBothShapes) {
    try {
        conv2d(Tensor::zeros({3, 4, 4}), Tensor::zeros({2, 2, 3, 3}));
        FAIL() << "expected a configuration error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::config);
        const std::string msg = e.what();
        EXPECT_NE(msg.find("[2x2x3x3]"), std::string::npos) << msg;
        EXPECT_NE(msg.find("[3x4x4]"), std::string::npos) << msg;
    }
}

TEST(SeparableConv, ColumnOfOnesGivesVerticalBoxSum) {
    std::mt19937_64 rng(5);
    const std::size_t k = 3;
    auto x = rand_tensor({1, 6, 5}, rng);
    auto w_row = Tensor::full({1, 1, k, 1}, 1.0);
    auto w_col = Tensor::from({1, 1, 1, k}, {0, 1, 0});  // delta at the centre tap
    auto y = separable_conv2d(x, w_row, w_col, 1, 1);
    ASSERT_EQ(y.shape(), (Shape{1, 6, 5}));
    auto img = as_image(x);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 5; ++j) {
            double want = 0.0;
            for (int d = -1; d <= 1; ++d) want += img.at(0, static_cast<std::ptrdiff_t>(i) + d, static_cast<std::ptrdiff_t>(j));
            EXPECT_NEAR(y.values()[i * 5 + j], want, 1e-12);
        }
}

TEST(SeparableConv, EqualsRankOneKernel) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(seed);
        const std::size_t k = 1 + 2 * (seed % 3);
        auto x = rand_tensor({1, 7, 8}, rng);
        auto a = rand_tensor({1, 1, k, 1}, rng);
        auto b = rand_tensor({1, 1, 1, k}, rng);
        std::vector<double> outer(k * k);
        for (std::size_t m = 0; m < k; ++m)
            for (std::size_t n = 0; n < k; ++n) outer[m * k + n] = a.values()[m] * b.values()[n];
        const std::size_t stride = 1 + seed % 2, pad = k / 2;
        auto sep = separable_conv2d(x, a, b, stride, pad);
        auto full = conv2d(x, Tensor::from({1, 1, k, k}, outer), {}, stride, pad);
        ASSERT_EQ(sep.shape(), full.shape());
        expect_near_all(sep.values(), {full.values().begin(), full.values().end()}, 1e-6);
    }
}

TEST(SeparableConv, ParameterCountVersusFullKernel) {
    const std::size_t k = 3, c = 8;
    auto w_row = Tensor::zeros({c, c, k, 1});
    auto w_col = Tensor::zeros({c, c, 1, k});
    auto full = Tensor::zeros({c, c, k, k});
    EXPECT_EQ(w_row.numel() + w_col.numel(), 384u);
    EXPECT_EQ(full.numel(), 576u);
}

TEST(SeparableConv, BrokenChannelChainIsConfigError) {
    try {
        separable_conv2d(Tensor::zeros({2, 5, 5}), Tensor::zeros({4, 2, 3, 1}), Tensor::zeros({4, 3, 1, 3}));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::config);
    }
}

TEST(ConvTranspose, SinglePixelScalesKernel) {
    const double c = 2.5;
    auto kernel = Tensor::from({1, 1, 2, 2}, {1, -2, 3, 4});
    auto y = conv_transpose2d(Tensor::from({1, 1, 1}, {c}), kernel);
    ASSERT_EQ(y.shape(), (Shape{1, 2, 2}));
    expect_near_all(y.values(), {2.5, -5, 7.5, 10}, 0.0);
}

TEST(ConvTranspose, AdjointOfConv2d) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(seed);
        const std::size_t stride = 1 + seed % 2, pad = seed % 2;
        // Ha = (Hb - 1) * s - 2p + k keeps the geometry exact in both directions.
        const std::size_t hb = 4, k = 3, ha = (hb - 1) * stride + k - 2 * pad;
        auto a = rand_tensor({2, ha, ha}, rng);
        auto kernel = rand_tensor({3, 2, k, k}, rng);
        auto b = rand_tensor({3, hb, hb}, rng);
        auto ka = conv2d(a, kernel, {}, stride, pad);
        auto ktb = conv_transpose2d(b, kernel, {}, stride, pad);
        ASSERT_EQ(ka.shape(), b.shape());
        ASSERT_EQ(ktb.shape(), a.shape());
        EXPECT_NEAR(inner(ka.values(), b.values()), inner(a.values(), ktb.values()), 1e-6);
    }
}

TEST(ConvTranspose, StrideTwoMatchesZeroStuffing) {
    std::mt19937_64 rng(11);
    auto x = rand_tensor({1, 2, 2}, rng);
    auto kernel = rand_tensor({1, 1, 2, 2}, rng);
    auto y = conv_transpose2d(x, kernel, {}, 2, 0);
    ASSERT_EQ(y.shape(), (Shape{1, 4, 4}));
    auto want = oracle::conv_transpose2d_zero_stuffing(as_image(x), as_kernel(kernel), 2, 0);
    expect_near_all(y.values(), want.v, 1e-12);

    auto x2 = rand_tensor({3, 4, 4}, rng);
    auto k2 = rand_tensor({3, 2, 4, 4}, rng);
    auto y2 = conv_transpose2d(x2, k2, {}, 2, 1);
    auto want2 = oracle::conv_transpose2d_zero_stuffing(as_image(x2), as_kernel(k2), 2, 1);
    ASSERT_EQ(y2.shape(), (Shape{2, 8, 8}));
    expect_near_all(y2.values(), want2.v, 1e-12);
}

TEST(ConvTranspose, NonPositiveExtentIsConfigError) {
    try {
        conv_transpose2d(Tensor::zeros({1, 1, 1}), Tensor::zeros({1, 1, 2, 2}), {}, 1, 3);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::config);
    }
}

TEST(BatchNorm, ConstantInputNormalizesToZero) {
    auto bn = BatchNormParams::create(2);
    auto y = batch_norm(Tensor::full({3, 2, 4, 4}, 7.0), bn);
    for (double v : y.values()) EXPECT_EQ(v, 0.0);
}

TEST(BatchNorm, ZeroGammaOutputsBeta) {
    std::mt19937_64 rng(2);
    auto bn = BatchNormParams::create(3);
    std::fill(bn.gamma.mutable_values().begin(), bn.gamma.mutable_values().end(), 0.0);
    auto beta = bn.beta.mutable_values();
    beta[0] = 0.5, beta[1] = -1.0, beta[2] = 2.0;
    auto y = batch_norm(rand_tensor({2, 3, 4, 4}, rng), bn);
    for (std::size_t i = 0; i < y.numel(); ++i) EXPECT_EQ(y.values()[i], beta[(i / 16) % 3]);
}

TEST(BatchNorm, TrainModeMomentsMatchAffine) {
    std::mt19937_64 rng(4);
    auto bn = BatchNormParams::create(2);
    auto g = bn.gamma.mutable_values();
    auto b = bn.beta.mutable_values();
    g[0] = 1.5, g[1] = 0.25, b[0] = -0.3, b[1] = 4.0;
    auto x = rand_tensor({5, 2, 6, 6}, rng);
    auto y = batch_norm(x, bn, {NormMode::train, 0.1, 1e-5});
    for (std::size_t c = 0; c < 2; ++c) {
        double m = 0, s = 0;
        std::size_t n = 0;
        for (std::size_t s0 = 0; s0 < 5; ++s0)
            for (std::size_t i = 0; i < 36; ++i, ++n) m += y.values()[(s0 * 2 + c) * 36 + i];
        m /= static_cast<double>(n);
        for (std::size_t s0 = 0; s0 < 5; ++s0)
            for (std::size_t i = 0; i < 36; ++i) {
                const double d = y.values()[(s0 * 2 + c) * 36 + i] - m;
                s += d * d;
            }
        s = std::sqrt(s / static_cast<double>(n));
        EXPECT_NEAR(m, b[c], 1e-4);
        EXPECT_NEAR(s, g[c], 1e-4);
    }
}

TEST(BatchNorm, EvalBeforeStatisticsIsRejected) {
    auto bn = BatchNormParams::create(1);
    try {
        batch_norm(Tensor::zeros({1, 1, 2, 2}), bn, {NormMode::eval});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::state);
    }
    batch_norm(Tensor::full({1, 1, 2, 2}, 3.0), bn, {NormMode::train});
    EXPECT_NO_THROW(batch_norm(Tensor::zeros({1, 1, 2, 2}), bn, {NormMode::eval}));
    EXPECT_EQ(bn.running_mean.values()[0], 3.0);
}

TEST(CoreMath, SoftmaxOfZerosIsUniform) {
    auto y = softmax(Tensor::zeros({3}), 0);
    for (double v : y.values()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(CoreMath, SoftmaxRowsAreDistributions) {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        auto x = scale(rand_tensor({4, 5, 3}, rng), 30.0);
        for (std::size_t axis = 0; axis < 3; ++axis) {
            auto y = softmax(x, axis);
            auto s = sum(y, axis);
            for (double v : y.values()) EXPECT_GE(v, 0.0);
            for (double v : s.values()) EXPECT_NEAR(v, 1.0, 1e-9);
        }
    }
}

TEST(CoreMath, Relu) {
    auto y = relu(Tensor::from({4}, {-2.0, -0.5, 0.5, 3.0}));
    expect_near_all(y.values(), {0.0, 0.0, 0.5, 3.0}, 0.0);
}

TEST(CoreMath, MatmulMatchesTripleLoop) {
    std::mt19937_64 rng(12);
    auto a = rand_tensor({4, 5}, rng);
    auto b = rand_tensor({5, 3}, rng);
    auto want = oracle::matmul({a.values().begin(), a.values().end()}, {b.values().begin(), b.values().end()}, 4, 5, 3);
    expect_near_all(matmul(a, b).values(), want, 1e-6);
}

TEST(CoreMath, BroadcastAdd) {
    auto y = add(Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6}), Tensor::from({3}, {10, 20, 30}));
    expect_near_all(y.values(), {11, 22, 33, 14, 25, 36}, 0.0);
}

TEST(CoreMath, AxisOutOfRangeIsConfigError) {
    auto x = Tensor::zeros({2, 3});
    for (auto f : {+[](const Tensor& t) { return softmax(t, 2); }, +[](const Tensor& t) { return sum(t, 5); },
                   +[](const Tensor& t) { return mean(t, 2); }}) {
        try {
            f(x);
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::config);
        }
    }
}

TEST(Autodiff, SecondBackwardIsRejected) {
    auto x = Tensor::from({3}, {1, 2, 3}, true);
    auto y = sum_all(mul(x, x));
    y.backward();
    expect_near_all(x.grad(), {2, 4, 6}, 0.0);
    try {
        y.backward();
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::state);
    }
}

TEST(Autodiff, NonScalarBackwardIsUsageError) {
    auto x = Tensor::from({2}, {1, 2}, true);
    try {
        scale(x, 2.0).backward();
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::usage);
    }
}

TEST(Autodiff, GradShapesMatchValues) {
    std::mt19937_64 rng(6);
    auto x = rand_tensor({1, 2, 5, 5}, rng, true);
    auto k = rand_tensor({3, 2, 3, 3}, rng, true);
    auto mid = relu(conv2d(x, k, {}, 1, 1));
    sum_all(mid).backward();
    EXPECT_EQ(x.grad().size(), x.numel());
    EXPECT_EQ(k.grad().size(), k.numel());
    EXPECT_EQ(mid.grad().size(), mid.numel());
}

TEST(GradCheck, SumHasUnitGradient) {
    std::mt19937_64 rng(0);
    std::vector<Tensor> in{rand_tensor({3, 4}, rng, true)};
    EXPECT_LT(grad_check([](std::span<const Tensor> t) { return sum_all(t[0]); }, in), 1e-9);
}

TEST(GradCheck, NonScalarProgramIsUsageError) {
    std::vector<Tensor> in{Tensor::zeros({2}, true)};
    try {
        grad_check([](std::span<const Tensor> t) { return scale(t[0], 1.0); }, in);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::usage);
    }
}

TEST(GradCheck, EpsOutsideRangeIsUsageError) {
    std::vector<Tensor> in{Tensor::zeros({2}, true)};
    EXPECT_THROW(grad_check([](std::span<const Tensor> t) { return sum_all(t[0]); }, in, 1e-2), Error);
}

// Each differentiable primitive against central differences on five seeds.
TEST(GradCheck, EveryPrimitive) {
    struct Case {
        const char* name;
        std::vector<Shape> shapes;
        ScalarProgram f;
    };
    const std::vector<std::int32_t> labels{0, 2, 1, 1, 2, 0, 1, 2, 0, 0, 1, 2, 2, 1, 0, 1, 0, 2};
    std::vector<Case> cases{
        {"add_broadcast", {{3, 4}, {4}}, [](auto t) { return sum_all(mul(add(t[0], t[1]), t[0])); }},
        {"sub_mul", {{2, 3}, {2, 3}}, [](auto t) { return sum_all(mul(sub(t[0], t[1]), t[1])); }},
        {"scale", {{5}}, [](auto t) { return sum_all(mul(scale(t[0], -1.7), t[0])); }},
        {"sigmoid", {{6}}, [](auto t) { return sum_all(mul(sigmoid(t[0]), t[0])); }},
        {"tanh", {{6}}, [](auto t) { return sum_all(mul(tanh(t[0]), t[0])); }},
        {"relu", {{6}}, [](auto t) { return sum_all(mul(relu(t[0]), t[0])); }},
        {"softmax", {{3, 4}, {3, 4}}, [](auto t) { return sum_all(mul(softmax(t[0], 1), t[1])); }},
        {"softmax_axis0", {{3, 4}, {3, 4}}, [](auto t) { return sum_all(mul(softmax(t[0], 0), t[1])); }},
        {"matmul", {{2, 3, 4}, {4, 5}}, [](auto t) { return sum_all(tanh(matmul(t[0], t[1]))); }},
        {"bmm", {{2, 3, 4}, {2, 4, 2}}, [](auto t) { return sum_all(tanh(matmul(t[0], t[1]))); }},
        {"transpose", {{2, 3, 4}, {2, 4, 3}}, [](auto t) { return sum_all(mul(transpose(t[0]), t[1])); }},
        {"affine", {{3, 4}, {4, 2}, {2}}, [](auto t) { return sum_all(tanh(affine(t[0], t[1], t[2]))); }},
        {"concat_slice", {{2, 3}, {2, 2}},
         [](auto t) {
             auto c = concat({t[0], t[1]}, 1);
             return sum_all(mul(slice(c, 1, 1, 4), slice(c, 1, 0, 3)));
         }},
        {"sum_mean_axis", {{3, 4, 2}},
         [](auto t) { return sum_all(mul(sum(t[0], 1), tanh(mean(t[0], 1)))); }},
        {"conv2d", {{2, 2, 5, 5}, {3, 2, 3, 3}, {3}},
         [](auto t) { return sum_all(tanh(conv2d(t[0], t[1], t[2], 2, 1))); }},
        {"separable", {{1, 2, 5, 5}, {3, 2, 3, 1}, {2, 3, 1, 3}},
         [](auto t) { return sum_all(tanh(separable_conv2d(t[0], t[1], t[2], 1, 1))); }},
        {"conv_transpose", {{2, 2, 3, 3}, {2, 3, 4, 4}, {3}},
         [](auto t) { return sum_all(tanh(conv_transpose2d(t[0], t[1], t[2], 2, 1))); }},
        {"pool_upsample", {{1, 2, 4, 4}},
         [](auto t) { return sum_all(mul(upsample_nearest(avg_pool2d(t[0], 2), 2), t[0])); }},
        {"global_pool", {{2, 3, 2, 2}}, [](auto t) { return sum_all(tanh(global_avg_pool(t[0]))); }},
        {"cross_entropy", {{2, 3, 3, 3}},
         [labels](auto t) { return cross_entropy(t[0], labels); }},
    };
    for (const auto& c : cases) {
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            std::mt19937_64 rng(100 + seed);
            std::vector<Tensor> inputs;
            for (const auto& s : c.shapes) inputs.push_back(rand_tensor(s, rng, true));
            const auto report = grad_check_report(c.f, inputs, 1e-5);
            EXPECT_LT(report.max_rel_error, 1e-4) << c.name << " seed " << seed << " input " << report.worst_input
                                                  << "[" << report.worst_index << "] analytic " << report.analytic
                                                  << " numeric " << report.numeric;
        }
    }
}

TEST(GradCheck, BatchNormTrainAndEval) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        std::mt19937_64 rng(seed);
        auto bn = BatchNormParams::create(3);
        auto g = bn.gamma.mutable_values();
        for (auto& v : g) v = 0.5 + std::uniform_real_distribution<double>(0, 1)(rng);
        std::vector<Tensor> in{rand_tensor({2, 3, 3, 3}, rng, true), bn.gamma, bn.beta, rand_tensor({2, 3, 3, 3}, rng, true)};
        auto probe = [&bn](NormMode mode) {
            return [&bn, mode](std::span<const Tensor> t) {
                BatchNormParams p = bn;
                p.gamma = t[1];
                p.beta = t[2];
                return sum_all(mul(batch_norm(t[0], p, {mode}), t[3]));
            };
        };
        EXPECT_LT(grad_check(probe(NormMode::train), in), 1e-4) << "train seed " << seed;
        EXPECT_LT(grad_check(probe(NormMode::eval), in), 1e-4) << "eval seed " << seed;
    }
}

TEST(GradCheck, CrossEntropyOfConvReluStack) {
    const std::vector<std::int32_t> labels{0, 1, 2, 1, 0, 2, 2, 1, 0, 1, 1, 0, 2, 0, 1, 2};
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        std::mt19937_64 rng(seed + 40);
        std::vector<Tensor> in{rand_tensor({1, 2, 4, 4}, rng, true), rand_tensor({4, 2, 3, 3}, rng, true),
                               rand_tensor({3, 4, 3, 3}, rng, true), rand_tensor({3}, rng, true)};
        auto f = [&labels](std::span<const Tensor> t) {
            auto h = relu(conv2d(t[0], t[1], {}, 1, 1));
            return cross_entropy(conv2d(h, t[2], t[3], 1, 1), labels);
        };
        EXPECT_LT(grad_check(f, in), 1e-4);
    }
}

TEST(Determinism, ThreadCountDoesNotChangeResults) {
    auto run = [](int threads) {
        set_num_threads(threads);
        std::mt19937_64 rng(21);
        auto x = rand_tensor({5, 3, 8, 8}, rng, true);
        auto k = rand_tensor({4, 3, 3, 3}, rng, true);
        auto kt = rand_tensor({4, 2, 4, 4}, rng, true);
        auto y = conv_transpose2d(relu(conv2d(x, k, {}, 2, 1)), kt, {}, 2, 1);
        sum_all(mul(y, y)).backward();
        std::vector<double> out(y.values().begin(), y.values().end());
        out.insert(out.end(), k.grad().begin(), k.grad().end());
        out.insert(out.end(), kt.grad().begin(), kt.grad().end());
        out.insert(out.end(), x.grad().begin(), x.grad().end());
        return out;
    };
    const auto one = run(1);
    const auto three = run(3);
    set_num_threads(1);
    ASSERT_EQ(one.size(), three.size());
    for (std::size_t i = 0; i < one.size(); ++i) ASSERT_EQ(one[i], three[i]) << i;
}

TEST(Serialization, TensorRecordRoundTripIsBitExact) {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 25; ++trial) {
        Shape shape(1 + rng() % 4);
        for (auto& d : shape) d = 1 + rng() % 5;
        auto t = rand_tensor(shape, rng);
        t.mutable_values()[0] = -0.0;
        std::stringstream ss;
        BinaryWriter w(ss);
        write_tensor_record(w, t);
        EXPECT_EQ(ss.str().size(), 4 + 8 * shape.size() + 8 * t.numel());
        BinaryReader r(ss, ErrorKind::checkpoint_format);
        auto back = read_tensor_record(r);
        ASSERT_EQ(back.shape(), t.shape());
        EXPECT_EQ(0, std::memcmp(back.values().data(), t.values().data(), t.numel() * sizeof(double)));
    }
}

TEST(Serialization, TruncatedRecordIsFormatError) {
    std::stringstream ss;
    BinaryWriter w(ss);
    write_tensor_record(w, Tensor::zeros({3, 3}));
    std::string bytes = ss.str();
    std::stringstream cut(bytes.substr(0, bytes.size() - 5));
    BinaryReader r(cut, ErrorKind::dataset_format);
    try {
        read_tensor_record(r);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::dataset_format);
    }
}
