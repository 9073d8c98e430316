#include "tensor/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

namespace sephr {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

namespace detail {

std::span<double> Node::ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
}

}  // namespace detail

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    const auto n = shape_numel(shape);
    return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
    for (auto d : shape)
        SEPHR_CHECK(d > 0, ErrorKind::config, "tensor extents must be positive, got ", shape_str(shape));
    SEPHR_CHECK(shape_numel(shape) == values.size(), ErrorKind::config, "shape ", shape_str(shape),
                " holds ", shape_numel(shape), " values but ", values.size(), " were given");
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from({1}, {value}, requires_grad);
}

double Tensor::item() const {
    SEPHR_CHECK(numel() == 1, ErrorKind::usage, "item() on tensor of shape ", shape_str(shape()));
    return node_->value[0];
}

void Tensor::zero_grad() {
    node_->grad.clear();
}

Tensor Tensor::detach() const {
    auto node = std::make_shared<detail::Node>();
    node->shape = node_->shape;
    node->value = node_->value;
    return Tensor(std::move(node));
}

Tensor Tensor::clone() const {
    auto t = detach();
    t.node_->requires_grad = node_->requires_grad;
    return t;
}

Tensor Tensor::make_result(Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
                           std::function<void(detail::Node&)> backward_fn) {
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    bool any = false;
    for (const auto& in : inputs) any = any || in.node_->requires_grad;
    if (any) {
        node->requires_grad = true;
        node->inputs.reserve(inputs.size());
        for (auto& in : inputs) node->inputs.push_back(in.node_);
        node->backward_fn = std::move(backward_fn);
    }
    return Tensor(std::move(node));
}

void Tensor::backward() {
    SEPHR_CHECK(numel() == 1, ErrorKind::usage, "backward() needs a scalar output, got shape ",
                shape_str(shape()));
    SEPHR_CHECK(!node_->released, ErrorKind::state,
                "backward() already ran on this graph; rebuild it before differentiating again");
    SEPHR_CHECK(node_->requires_grad, ErrorKind::usage,
                "backward() on a tensor that does not require grad");

    // Iterative post-order DFS; reversed it is a valid reverse-topological order.
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> seen;
    std::vector<std::pair<detail::Node*, std::size_t>> stack{{node_.get(), 0}};
    seen.insert(node_.get());
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->inputs.size()) {
            auto* child = n->inputs[next++].get();
            if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }

    node_->ensure_grad()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        auto* n = *it;
        if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
    }
    for (auto* n : order) {
        if (n->backward_fn || !n->inputs.empty()) {
            n->backward_fn = nullptr;
            n->inputs.clear();
            n->released = true;
        }
    }
    node_->released = true;
}

}  // namespace sephr
