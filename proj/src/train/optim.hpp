#pragma once

#include <span>
#include <vector>

#include "tensor/parameters.hpp"

namespace sephr {

struct AdamHyper {
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

// One Adam step with bias correction on a flat parameter block. Decoupled
// weight decay scales p by (1 - lr * weight_decay) before the Adam update.
// t is the 1-based step count.
void adam_update(std::span<double> p, std::span<const double> g, std::span<double> m, std::span<double> v, double lr,
                 double weight_decay, std::size_t t, const AdamHyper& hyper = {});

class Adam {
public:
    explicit Adam(const ParameterSet& params, AdamHyper hyper = {});

    // Applies one step using the gradients currently stored on the params.
    void step(double lr, double weight_decay);
    std::size_t steps() const { return t_; }

private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_, v_;
    AdamHyper hyper_;
    std::size_t t_ = 0;
};

// base_lr * (1 + cos(pi * epoch / total)) / 2.
double cosine_lr(std::size_t epoch, std::size_t total_epochs, double base_lr);

}  // namespace sephr
