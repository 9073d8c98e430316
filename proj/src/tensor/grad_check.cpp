#include "tensor/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace sephr {

namespace {

double evaluate(const ScalarProgram& f, std::span<Tensor> inputs) {
    const Tensor y = f(std::span<const Tensor>(inputs.data(), inputs.size()));
    return y.values()[0];
}

}  // namespace

GradCheckReport grad_check_report(const ScalarProgram& f, std::span<Tensor> inputs, double eps) {
    SEPHR_CHECK(eps >= 1e-6 && eps <= 1e-3, ErrorKind::usage, "grad_check: eps ", eps, " outside [1e-6, 1e-3]");
    for (auto& x : inputs) {
        SEPHR_CHECK(x.requires_grad(), ErrorKind::usage, "grad_check: every input must require grad");
        x.zero_grad();
    }
    Tensor y = f(std::span<const Tensor>(inputs.data(), inputs.size()));
    SEPHR_CHECK(y.numel() == 1, ErrorKind::usage, "grad_check: program output must be scalar, got ",
                shape_str(y.shape()));
    y.backward();

    std::vector<std::vector<double>> analytic;
    for (auto& x : inputs) {
        if (x.has_grad())
            analytic.emplace_back(x.grad().begin(), x.grad().end());
        else
            analytic.emplace_back(x.numel(), 0.0);
    }

    GradCheckReport report;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        auto values = inputs[i].mutable_values();
        for (std::size_t j = 0; j < values.size(); ++j) {
            const double saved = values[j];
            values[j] = saved + eps;
            const double up = evaluate(f, inputs);
            values[j] = saved - eps;
            const double down = evaluate(f, inputs);
            values[j] = saved;
            const double numeric = (up - down) / (2.0 * eps);
            const double a = analytic[i][j];
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
            const double rel = std::abs(a - numeric) / denom;
            if (rel > report.max_rel_error || (i == 0 && j == 0)) {
                report = {rel, i, j, a, numeric};
            }
        }
    }
    for (auto& x : inputs) x.zero_grad();
    return report;
}

double grad_check(const ScalarProgram& f, std::span<Tensor> inputs, double eps) {
    return grad_check_report(f, inputs, eps).max_rel_error;
}

}  // namespace sephr
