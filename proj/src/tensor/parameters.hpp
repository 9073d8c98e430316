#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "tensor/ops.hpp"
#include "tensor/serialize.hpp"

namespace sephr {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double normal(double mean = 0.0, double stddev = 1.0) {
        return std::normal_distribution<double>(mean, stddev)(engine_);
    }
    double uniform(double lo = 0.0, double hi = 1.0) {
        return std::uniform_real_distribution<double>(lo, hi)(engine_);
    }
    std::size_t below(std::size_t n) {
        return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
    }
    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

Tensor random_normal(Shape shape, Rng& rng, double stddev = 1.0, bool requires_grad = false);

// Owns the named learnable tensors and non-learnable buffers of a model.
// Modules keep Tensor handles that alias the entries stored here.
class ParameterSet {
public:
    // Fan-in scaled Gaussian: N(0, gain / fan_in).
    Tensor add_weight(const std::string& name, Shape shape, std::size_t fan_in, Rng& rng, double gain = 2.0);
    Tensor add_zeros(const std::string& name, Shape shape);
    Tensor add_tensor(const std::string& name, Tensor t);
    BatchNormParams add_batch_norm(const std::string& name, std::size_t channels);
    void add_buffer(const std::string& name, Tensor t);

    const std::vector<std::pair<std::string, Tensor>>& params() const { return params_; }
    const std::vector<std::pair<std::string, Tensor>>& buffers() const { return buffers_; }

    std::size_t param_count() const;
    void zero_grad();

    // Appends every parameter and buffer to an archive.
    void export_to(TensorArchive& archive) const;
    // Copies values in place from an archive; names and shapes must match.
    void import_from(const TensorArchive& archive);
    // Copies values from another set with identical layout.
    void copy_values_from(const ParameterSet& other);

private:
    void check_fresh(const std::string& name) const;

    std::vector<std::pair<std::string, Tensor>> params_;
    std::vector<std::pair<std::string, Tensor>> buffers_;
};

}  // namespace sephr
