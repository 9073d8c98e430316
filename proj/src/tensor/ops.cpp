#include "tensor/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "tensor/eigen.hpp"

namespace sephr {

namespace {

// Output-space index of each operand for a broadcast binary op.
struct BroadcastPlan {
    Shape out_shape;
    bool same_shape = false;
    std::vector<std::size_t> a_index, b_index;  // empty when same_shape
};

std::shared_ptr<BroadcastPlan> plan_broadcast(const Shape& a, const Shape& b) {
    auto plan = std::make_shared<BroadcastPlan>();
    if (a == b) {
        plan->out_shape = a;
        plan->same_shape = true;
        return plan;
    }
    const std::size_t rank = std::max(a.size(), b.size());
    Shape pa(rank, 1), pb(rank, 1);
    std::copy(a.begin(), a.end(), pa.begin() + static_cast<std::ptrdiff_t>(rank - a.size()));
    std::copy(b.begin(), b.end(), pb.begin() + static_cast<std::ptrdiff_t>(rank - b.size()));
    plan->out_shape.resize(rank);
    for (std::size_t i = 0; i < rank; ++i) {
        SEPHR_CHECK(pa[i] == pb[i] || pa[i] == 1 || pb[i] == 1, ErrorKind::config,
                    "cannot broadcast ", shape_str(a), " with ", shape_str(b));
        plan->out_shape[i] = std::max(pa[i], pb[i]);
    }
    auto strides_for = [&](const Shape& padded) {
        std::vector<std::size_t> s(rank, 0);
        std::size_t acc = 1;
        for (std::size_t i = rank; i-- > 0;) {
            s[i] = padded[i] == 1 ? 0 : acc;
            acc *= padded[i];
        }
        return s;
    };
    const auto sa = strides_for(pa), sb = strides_for(pb);
    const std::size_t n = shape_numel(plan->out_shape);
    plan->a_index.resize(n);
    plan->b_index.resize(n);
    std::vector<std::size_t> idx(rank, 0);
    std::size_t ia = 0, ib = 0;
    for (std::size_t flat = 0; flat < n; ++flat) {
        plan->a_index[flat] = ia;
        plan->b_index[flat] = ib;
        for (std::size_t d = rank; d-- > 0;) {
            ++idx[d];
            ia += sa[d];
            ib += sb[d];
            if (idx[d] < plan->out_shape[d]) break;
            ia -= sa[d] * idx[d];
            ib -= sb[d] * idx[d];
            idx[d] = 0;
        }
    }
    return plan;
}

enum class BinaryKind { add, sub, mul };

Tensor binary(const Tensor& a, const Tensor& b, BinaryKind kind) {
    auto plan = plan_broadcast(a.shape(), b.shape());
    const auto av = a.values(), bv = b.values();
    const std::size_t n = shape_numel(plan->out_shape);
    std::vector<double> out(n);
    auto op = [kind](double x, double y) {
        switch (kind) {
            case BinaryKind::add: return x + y;
            case BinaryKind::sub: return x - y;
            default: return x * y;
        }
    };
    if (plan->same_shape) {
        for (std::size_t i = 0; i < n; ++i) out[i] = op(av[i], bv[i]);
    } else {
        for (std::size_t i = 0; i < n; ++i) out[i] = op(av[plan->a_index[i]], bv[plan->b_index[i]]);
    }
    return Tensor::make_result(plan->out_shape, std::move(out), {a, b}, [plan, kind](detail::Node& self) {
        auto& na = *self.inputs[0];
        auto& nb = *self.inputs[1];
        const auto& g = self.grad;
        const std::size_t n = g.size();
        auto ia = [&](std::size_t i) { return plan->same_shape ? i : plan->a_index[i]; };
        auto ib = [&](std::size_t i) { return plan->same_shape ? i : plan->b_index[i]; };
        if (na.requires_grad) {
            auto ga = na.ensure_grad();
            for (std::size_t i = 0; i < n; ++i)
                ga[ia(i)] += kind == BinaryKind::mul ? g[i] * nb.value[ib(i)] : g[i];
        }
        if (nb.requires_grad) {
            auto gb = nb.ensure_grad();
            for (std::size_t i = 0; i < n; ++i) {
                switch (kind) {
                    case BinaryKind::add: gb[ib(i)] += g[i]; break;
                    case BinaryKind::sub: gb[ib(i)] -= g[i]; break;
                    case BinaryKind::mul: gb[ib(i)] += g[i] * na.value[ia(i)]; break;
                }
            }
        }
    });
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, Fwd fwd, Deriv deriv_from_output) {
    const auto xv = x.values();
    std::vector<double> out(xv.size());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = fwd(xv[i]);
    return Tensor::make_result(x.shape(), std::move(out), {x}, [deriv_from_output](detail::Node& self) {
        auto gx = self.inputs[0]->ensure_grad();
        const auto& xin = self.inputs[0]->value;
        for (std::size_t i = 0; i < gx.size(); ++i)
            gx[i] += self.grad[i] * deriv_from_output(xin[i], self.value[i]);
    });
}

struct AxisSplit {
    std::size_t outer, len, inner;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
    SEPHR_CHECK(axis < shape.size(), ErrorKind::config, "axis ", axis, " out of range for shape ",
                shape_str(shape));
    AxisSplit s{1, shape[axis], 1};
    for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
    return s;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::add); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::sub); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::mul); }

Tensor scale(const Tensor& x, double factor) {
    return unary(
        x, [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double value) {
    return unary(
        x, [value](double v) { return v + value; }, [](double, double) { return 1.0; });
}

Tensor relu(const Tensor& x) {
    return unary(
        x, [](double v) { return v > 0.0 ? v : 0.0; },
        [](double in, double) { return in > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
    return unary(
        x,
        [](double v) {
            if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
            const double e = std::exp(v);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
    return unary(
        x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor reshape(const Tensor& x, Shape shape) {
    SEPHR_CHECK(shape_numel(shape) == x.numel(), ErrorKind::config, "cannot reshape ",
                shape_str(x.shape()), " to ", shape_str(shape));
    std::vector<double> out(x.values().begin(), x.values().end());
    return Tensor::make_result(std::move(shape), std::move(out), {x}, [](detail::Node& self) {
        auto gx = self.inputs[0]->ensure_grad();
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i];
    });
}

Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis) {
    return concat(std::span<const Tensor>(parts.begin(), parts.size()), axis);
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
    SEPHR_CHECK(!parts.empty(), ErrorKind::config, "concat of an empty list");
    const Shape& first = parts[0].shape();
    SEPHR_CHECK(axis < first.size(), ErrorKind::config, "concat axis ", axis, " out of range for ",
                shape_str(first));
    Shape out_shape = first;
    out_shape[axis] = 0;
    std::vector<std::size_t> lens;
    for (const auto& p : parts) {
        SEPHR_CHECK(p.rank() == first.size(), ErrorKind::config, "concat rank mismatch: ",
                    shape_str(first), " vs ", shape_str(p.shape()));
        for (std::size_t d = 0; d < first.size(); ++d)
            SEPHR_CHECK(d == axis || p.dim(d) == first[d], ErrorKind::config,
                        "concat extent mismatch: ", shape_str(first), " vs ", shape_str(p.shape()));
        lens.push_back(p.dim(axis));
        out_shape[axis] += p.dim(axis);
    }
    const auto split = split_axis(out_shape, axis);
    std::vector<double> out(shape_numel(out_shape));
    std::size_t offset = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const auto pv = parts[k].values();
        const std::size_t block = lens[k] * split.inner;
        for (std::size_t o = 0; o < split.outer; ++o)
            std::copy_n(pv.begin() + static_cast<std::ptrdiff_t>(o * block), block,
                        out.begin() + static_cast<std::ptrdiff_t>(o * split.len * split.inner + offset));
        offset += block;
    }
    std::vector<Tensor> inputs(parts.begin(), parts.end());
    return Tensor::make_result(out_shape, std::move(out), std::move(inputs),
                               [split, lens](detail::Node& self) {
                                   std::size_t offset = 0;
                                   for (std::size_t k = 0; k < self.inputs.size(); ++k) {
                                       const std::size_t block = lens[k] * split.inner;
                                       auto& in = *self.inputs[k];
                                       if (in.requires_grad) {
                                           auto g = in.ensure_grad();
                                           for (std::size_t o = 0; o < split.outer; ++o) {
                                               const double* src = self.grad.data() +
                                                                   o * split.len * split.inner + offset;
                                               double* dst = g.data() + o * block;
                                               for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
                                           }
                                       }
                                       offset += block;
                                   }
                               });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end) {
    const auto split = split_axis(x.shape(), axis);
    SEPHR_CHECK(begin < end && end <= split.len, ErrorKind::config, "slice [", begin, ", ", end,
                ") out of range for axis ", axis, " of ", shape_str(x.shape()));
    Shape out_shape = x.shape();
    out_shape[axis] = end - begin;
    const std::size_t block = (end - begin) * split.inner;
    const auto xv = x.values();
    std::vector<double> out(split.outer * block);
    for (std::size_t o = 0; o < split.outer; ++o)
        std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>(o * split.len * split.inner + begin * split.inner),
                    block, out.begin() + static_cast<std::ptrdiff_t>(o * block));
    return Tensor::make_result(out_shape, std::move(out), {x}, [split, block, begin](detail::Node& self) {
        auto g = self.inputs[0]->ensure_grad();
        for (std::size_t o = 0; o < split.outer; ++o) {
            double* dst = g.data() + o * split.len * split.inner + begin * split.inner;
            const double* src = self.grad.data() + o * block;
            for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
        }
    });
}

Tensor transpose(const Tensor& x) {
    SEPHR_CHECK(x.rank() >= 2, ErrorKind::config, "transpose needs rank >= 2, got ", shape_str(x.shape()));
    Shape out_shape = x.shape();
    const std::size_t r = out_shape.size();
    const std::size_t m = out_shape[r - 2], n = out_shape[r - 1];
    std::swap(out_shape[r - 2], out_shape[r - 1]);
    const std::size_t batch = x.numel() / (m * n);
    const auto xv = x.values();
    std::vector<double> out(x.numel());
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) out[b * m * n + j * m + i] = xv[b * m * n + i * n + j];
    return Tensor::make_result(out_shape, std::move(out), {x}, [batch, m, n](detail::Node& self) {
        auto g = self.inputs[0]->ensure_grad();
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) g[b * m * n + i * n + j] += self.grad[b * m * n + j * m + i];
    });
}

Tensor sum(const Tensor& x, std::size_t axis) {
    const auto split = split_axis(x.shape(), axis);
    Shape out_shape = x.shape();
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
    if (out_shape.empty()) out_shape = {1};
    const auto xv = x.values();
    std::vector<double> out(split.outer * split.inner, 0.0);
    for (std::size_t o = 0; o < split.outer; ++o)
        for (std::size_t l = 0; l < split.len; ++l)
            for (std::size_t i = 0; i < split.inner; ++i)
                out[o * split.inner + i] += xv[(o * split.len + l) * split.inner + i];
    return Tensor::make_result(out_shape, std::move(out), {x}, [split](detail::Node& self) {
        auto g = self.inputs[0]->ensure_grad();
        for (std::size_t o = 0; o < split.outer; ++o)
            for (std::size_t l = 0; l < split.len; ++l)
                for (std::size_t i = 0; i < split.inner; ++i)
                    g[(o * split.len + l) * split.inner + i] += self.grad[o * split.inner + i];
    });
}

Tensor mean(const Tensor& x, std::size_t axis) {
    const auto len = split_axis(x.shape(), axis).len;
    return scale(sum(x, axis), 1.0 / static_cast<double>(len));
}

Tensor sum_all(const Tensor& x) {
    double total = 0.0;
    for (double v : x.values()) total += v;
    return Tensor::make_result({1}, {total}, {x}, [](detail::Node& self) {
        auto g = self.inputs[0]->ensure_grad();
        for (auto& v : g) v += self.grad[0];
    });
}

Tensor mean_all(const Tensor& x) {
    return scale(sum_all(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor softmax(const Tensor& x, std::size_t axis) {
    const auto split = split_axis(x.shape(), axis);
    const auto xv = x.values();
    std::vector<double> out(x.numel());
    for (std::size_t o = 0; o < split.outer; ++o) {
        for (std::size_t i = 0; i < split.inner; ++i) {
            const std::size_t base = o * split.len * split.inner + i;
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t l = 0; l < split.len; ++l) mx = std::max(mx, xv[base + l * split.inner]);
            double total = 0.0;
            for (std::size_t l = 0; l < split.len; ++l) {
                const double e = std::exp(xv[base + l * split.inner] - mx);
                out[base + l * split.inner] = e;
                total += e;
            }
            for (std::size_t l = 0; l < split.len; ++l) out[base + l * split.inner] /= total;
        }
    }
    return Tensor::make_result(x.shape(), std::move(out), {x}, [split](detail::Node& self) {
        auto g = self.inputs[0]->ensure_grad();
        const auto& y = self.value;
        const auto& dy = self.grad;
        for (std::size_t o = 0; o < split.outer; ++o) {
            for (std::size_t i = 0; i < split.inner; ++i) {
                const std::size_t base = o * split.len * split.inner + i;
                double dot = 0.0;
                for (std::size_t l = 0; l < split.len; ++l)
                    dot += dy[base + l * split.inner] * y[base + l * split.inner];
                for (std::size_t l = 0; l < split.len; ++l) {
                    const std::size_t k = base + l * split.inner;
                    g[k] += y[k] * (dy[k] - dot);
                }
            }
        }
    });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    SEPHR_CHECK(a.rank() >= 2 && b.rank() >= 2, ErrorKind::config, "matmul needs rank >= 2 operands, got ",
                shape_str(a.shape()), " and ", shape_str(b.shape()));
    const std::size_t m = a.dim(a.rank() - 2), k = a.dim(a.rank() - 1);
    const std::size_t kb = b.dim(b.rank() - 2), n = b.dim(b.rank() - 1);
    SEPHR_CHECK(k == kb, ErrorKind::config, "matmul inner extents differ: ", shape_str(a.shape()), " x ",
                shape_str(b.shape()));
    const bool shared_b = b.rank() == 2;
    const std::size_t batch = a.numel() / (m * k);
    if (!shared_b) {
        SEPHR_CHECK(b.rank() == a.rank() && std::equal(a.shape().begin(), a.shape().end() - 2, b.shape().begin()),
                    ErrorKind::config, "batched matmul leading extents differ: ", shape_str(a.shape()), " x ",
                    shape_str(b.shape()));
    }
    Shape out_shape = a.shape();
    out_shape.back() = n;
    std::vector<double> out(batch * m * n);
    if (shared_b) {
        eig::Map(out.data(), batch * m, n).noalias() =
            eig::CMap(a.values().data(), batch * m, k) * eig::CMap(b.values().data(), k, n);
    } else {
        for (std::size_t i = 0; i < batch; ++i)
            eig::Map(out.data() + i * m * n, m, n).noalias() =
                eig::CMap(a.values().data() + i * m * k, m, k) * eig::CMap(b.values().data() + i * k * n, k, n);
    }
    return Tensor::make_result(out_shape, std::move(out), {a, b}, [=](detail::Node& self) {
        auto& na = *self.inputs[0];
        auto& nb = *self.inputs[1];
        if (shared_b) {
            auto dc = eig::CMap(self.grad.data(), batch * m, n);
            if (na.requires_grad)
                eig::Map(na.ensure_grad().data(), batch * m, k).noalias() +=
                    dc * eig::CMap(nb.value.data(), k, n).transpose();
            if (nb.requires_grad)
                eig::Map(nb.ensure_grad().data(), k, n).noalias() +=
                    eig::CMap(na.value.data(), batch * m, k).transpose() * dc;
            return;
        }
        for (std::size_t i = 0; i < batch; ++i) {
            auto dc = eig::CMap(self.grad.data() + i * m * n, m, n);
            if (na.requires_grad)
                eig::Map(na.ensure_grad().data() + i * m * k, m, k).noalias() +=
                    dc * eig::CMap(nb.value.data() + i * k * n, k, n).transpose();
            if (nb.requires_grad)
                eig::Map(nb.ensure_grad().data() + i * k * n, k, n).noalias() +=
                    eig::CMap(na.value.data() + i * m * k, m, k).transpose() * dc;
        }
    });
}

Tensor affine(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    SEPHR_CHECK(weight.rank() == 2 && x.dim(x.rank() - 1) == weight.dim(0), ErrorKind::config,
                "affine: input ", shape_str(x.shape()), " does not match weight ", shape_str(weight.shape()));
    Tensor y = x.rank() == 1 ? reshape(matmul(reshape(x, {1, x.dim(0)}), weight), {weight.dim(1)})
                             : matmul(x, weight);
    if (!bias.defined()) return y;
    SEPHR_CHECK(bias.rank() == 1 && bias.dim(0) == weight.dim(1), ErrorKind::config, "affine: bias ",
                shape_str(bias.shape()), " does not match weight ", shape_str(weight.shape()));
    return add(y, bias);
}

}  // namespace sephr
