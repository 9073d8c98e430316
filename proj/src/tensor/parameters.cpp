#include "tensor/parameters.hpp"

#include <algorithm>
#include <cmath>

namespace sephr {

Tensor random_normal(Shape shape, Rng& rng, double stddev, bool requires_grad) {
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) x = rng.normal(0.0, stddev);
    return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

void ParameterSet::check_fresh(const std::string& name) const {
    auto same = [&](const auto& e) { return e.first == name; };
    SEPHR_CHECK(std::none_of(params_.begin(), params_.end(), same) &&
                    std::none_of(buffers_.begin(), buffers_.end(), same),
                ErrorKind::config, "duplicate parameter name '", name, "'");
}

Tensor ParameterSet::add_weight(const std::string& name, Shape shape, std::size_t fan_in, Rng& rng, double gain) {
    return add_tensor(name, random_normal(std::move(shape), rng, std::sqrt(gain / static_cast<double>(fan_in)), true));
}

Tensor ParameterSet::add_zeros(const std::string& name, Shape shape) {
    return add_tensor(name, Tensor::zeros(std::move(shape), true));
}

Tensor ParameterSet::add_tensor(const std::string& name, Tensor t) {
    check_fresh(name);
    params_.emplace_back(name, t);
    return t;
}

BatchNormParams ParameterSet::add_batch_norm(const std::string& name, std::size_t channels) {
    auto bn = BatchNormParams::create(channels);
    add_tensor(name + ".gamma", bn.gamma);
    add_tensor(name + ".beta", bn.beta);
    add_buffer(name + ".running_mean", bn.running_mean);
    add_buffer(name + ".running_var", bn.running_var);
    add_buffer(name + ".batches_tracked", bn.batches_tracked);
    return bn;
}

void ParameterSet::add_buffer(const std::string& name, Tensor t) {
    check_fresh(name);
    buffers_.emplace_back(name, std::move(t));
}

std::size_t ParameterSet::param_count() const {
    std::size_t n = 0;
    for (const auto& [_, t] : params_) n += t.numel();
    return n;
}

void ParameterSet::zero_grad() {
    for (auto& [_, t] : params_) t.zero_grad();
}

void ParameterSet::export_to(TensorArchive& archive) const {
    for (const auto& [name, t] : params_) archive.entries.emplace_back(name, t.detach());
    for (const auto& [name, t] : buffers_) archive.entries.emplace_back(name, t.detach());
}

namespace {

void copy_into(Tensor& dst, const Tensor& src, const std::string& name) {
    SEPHR_CHECK(dst.shape() == src.shape(), ErrorKind::checkpoint_format, "entry '", name, "' has shape ",
                shape_str(src.shape()), ", model expects ", shape_str(dst.shape()));
    std::copy(src.values().begin(), src.values().end(), dst.mutable_values().begin());
}

}  // namespace

void ParameterSet::import_from(const TensorArchive& archive) {
    auto load = [&](auto& list) {
        for (auto& [name, t] : list) {
            const Tensor* src = archive.find(name);
            SEPHR_CHECK(src, ErrorKind::checkpoint_format, "checkpoint is missing entry '", name, "'");
            copy_into(t, *src, name);
        }
    };
    load(params_);
    load(buffers_);
}

void ParameterSet::copy_values_from(const ParameterSet& other) {
    SEPHR_CHECK(params_.size() == other.params_.size() && buffers_.size() == other.buffers_.size(),
                ErrorKind::config, "parameter layouts differ");
    for (std::size_t i = 0; i < params_.size(); ++i) copy_into(params_[i].second, other.params_[i].second, params_[i].first);
    for (std::size_t i = 0; i < buffers_.size(); ++i)
        copy_into(buffers_[i].second, other.buffers_[i].second, buffers_[i].first);
}

}  // namespace sephr
