#include "train/optim.hpp"

#include <cmath>
#include <numbers>

namespace sephr {

void adam_update(std::span<double> p, std::span<const double> g, std::span<double> m, std::span<double> v, double lr,
                 double weight_decay, std::size_t t, const AdamHyper& hyper) {
    SEPHR_CHECK(t >= 1, ErrorKind::usage, "adam step count starts at 1");
    SEPHR_CHECK(g.size() == p.size() && m.size() == p.size() && v.size() == p.size(), ErrorKind::usage,
                "adam state size mismatch");
    const double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(t));
    const double decay = 1.0 - lr * weight_decay;
    for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * g[i];
        v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * g[i] * g[i];
        const double mh = m[i] / c1, vh = v[i] / c2;
        p[i] = p[i] * decay - lr * mh / (std::sqrt(vh) + hyper.eps);
    }
}

Adam::Adam(const ParameterSet& params, AdamHyper hyper) : hyper_(hyper) {
    for (const auto& [_, t] : params.params()) {
        params_.push_back(t);
        m_.emplace_back(t.numel(), 0.0);
        v_.emplace_back(t.numel(), 0.0);
    }
}

void Adam::step(double lr, double weight_decay) {
    ++t_;
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto& p = params_[i];
        const std::vector<double> zeros = p.has_grad() ? std::vector<double>{} : std::vector<double>(p.numel(), 0.0);
        std::span<const double> g = p.has_grad() ? p.grad() : std::span<const double>(zeros);
        adam_update(p.mutable_values(), g, m_[i], v_[i], lr, weight_decay, t_, hyper_);
    }
}

double cosine_lr(std::size_t epoch, std::size_t total_epochs, double base_lr) {
    SEPHR_CHECK(epoch < total_epochs, ErrorKind::usage, "epoch ", epoch, " outside a ", total_epochs, "-epoch schedule");
    return base_lr * 0.5 *
           (1.0 + std::cos(std::numbers::pi * static_cast<double>(epoch) / static_cast<double>(total_epochs)));
}

}  // namespace sephr
