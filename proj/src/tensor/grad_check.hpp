#pragma once

#include <functional>
#include <span>

#include "tensor/tensor.hpp"

namespace sephr {

using ScalarProgram = std::function<Tensor(std::span<const Tensor>)>;

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t worst_input = 0;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
};

// Compares reverse-mode gradients of a scalar program against central finite
// differences over every coordinate of every input. Inputs must be leaf
// tensors with requires_grad; they are perturbed in place and restored.
//
// Relative error is |a - n| / max(|a|, |n|, 1e-6); the floor keeps coordinates
// whose true gradient is ~0 from dividing rounding noise by zero.
GradCheckReport grad_check_report(const ScalarProgram& f, std::span<Tensor> inputs, double eps = 1e-5);

double grad_check(const ScalarProgram& f, std::span<Tensor> inputs, double eps = 1e-5);

}  // namespace sephr
