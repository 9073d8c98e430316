#pragma once

#include <memory>
#include <string>

#include "tensor/parameters.hpp"

namespace sephr {

// Registers a module's tensors under a name prefix and counts the learnable
// scalars created through it and through its children.
class ParamScope {
public:
    ParamScope(ParameterSet& set, std::string prefix, Rng& rng)
        : set_(set), prefix_(std::move(prefix)), rng_(rng) {}

    ParamScope child(const std::string& name) const {
        ParamScope c(set_, prefix_ + name + ".", rng_);
        c.count_ = count_;
        return c;
    }

    Tensor weight(const std::string& name, Shape shape, std::size_t fan_in, double gain = 2.0) {
        auto t = set_.add_weight(prefix_ + name, std::move(shape), fan_in, rng_, gain);
        *count_ += t.numel();
        return t;
    }
    Tensor zeros(const std::string& name, Shape shape) {
        auto t = set_.add_zeros(prefix_ + name, std::move(shape));
        *count_ += t.numel();
        return t;
    }
    BatchNormParams batch_norm(const std::string& name, std::size_t channels) {
        *count_ += 2 * channels;
        return set_.add_batch_norm(prefix_ + name, channels);
    }

    std::size_t count() const { return *count_; }
    Rng& rng() const { return rng_; }

private:
    ParameterSet& set_;
    std::string prefix_;
    Rng& rng_;
    std::shared_ptr<std::size_t> count_ = std::make_shared<std::size_t>(0);
};

}  // namespace sephr
