#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tensor/error.hpp"

namespace sephr {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tensor;

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // empty until first accumulation
    bool requires_grad = false;
    bool released = false;     // set once the graph this node roots has been consumed

    // Graph edges; cleared after backward so intermediate buffers can be freed.
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void(Node&)> backward_fn;

    std::span<double> ensure_grad();
};

}  // namespace detail

// Dense row-major array of doubles with an optional reverse-mode tape entry.
//
// A Tensor is a shared handle: copies alias the same storage. Values are
// treated as immutable once a tensor participates in a graph; only leaf
// tensors (parameters, buffers) are updated in place.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const noexcept { return static_cast<bool>(node_); }

    const Shape& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
    std::size_t numel() const { return node_->value.size(); }

    std::span<const double> values() const { return node_->value; }
    // In-place access for leaves (optimizer updates, running statistics).
    std::span<double> mutable_values() { return node_->value; }
    double item() const;

    bool requires_grad() const { return node_->requires_grad; }
    bool has_grad() const { return !node_->grad.empty(); }
    std::span<const double> grad() const { return node_->grad; }
    void zero_grad();

    // Reverse-mode sweep from this scalar. The tape is released afterwards;
    // calling backward() again on the same graph raises ErrorKind::state.
    void backward();

    // Same values, no history.
    Tensor detach() const;
    Tensor clone() const;

    // Internal: construct a graph node from an op.
    static Tensor make_result(Shape shape, std::vector<double> values,
                              std::vector<Tensor> inputs,
                              std::function<void(detail::Node&)> backward_fn);

    const std::shared_ptr<detail::Node>& node() const { return node_; }

private:
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

    std::shared_ptr<detail::Node> node_;
};

}  // namespace sephr
