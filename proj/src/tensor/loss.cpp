#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "tensor/ops.hpp"

namespace sephr {

Tensor cross_entropy(const Tensor& logits, std::span<const std::int32_t> labels) {
    SEPHR_CHECK(logits.rank() == 3 || logits.rank() == 4, ErrorKind::config,
                "cross_entropy: logits must be [K,H,W] or [N,K,H,W], got ", shape_str(logits.shape()));
    const bool batched = logits.rank() == 4;
    const std::size_t batch = batched ? logits.dim(0) : 1;
    const std::size_t classes = logits.dim(batched ? 1 : 0);
    const std::size_t plane = logits.dim(batched ? 2 : 1) * logits.dim(batched ? 3 : 2);
    const std::size_t width = logits.dim(batched ? 3 : 2);
    SEPHR_CHECK(labels.size() == batch * plane, ErrorKind::config, "cross_entropy: ", labels.size(),
                " labels for logits ", shape_str(logits.shape()));
    for (std::size_t p = 0; p < labels.size(); ++p) {
        const auto y = labels[p];
        SEPHR_CHECK(y >= 0 && static_cast<std::size_t>(y) < classes, ErrorKind::data, "cross_entropy: label ", y,
                    " at sample ", p / plane, " pixel (", (p % plane) / width, ", ", (p % plane) % width,
                    ") outside [0, ", classes, ")");
    }

    constexpr double floor = 1e-12;
    const auto lv = logits.values();
    auto probs = std::make_shared<std::vector<double>>(logits.numel());
    auto floored = std::make_shared<std::vector<char>>(labels.size(), 0);
    double total = 0.0;
    for (std::size_t n = 0; n < batch; ++n) {
        const double* z = lv.data() + n * classes * plane;
        double* pr = probs->data() + n * classes * plane;
        for (std::size_t p = 0; p < plane; ++p) {
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < classes; ++k) mx = std::max(mx, z[k * plane + p]);
            double s = 0.0;
            for (std::size_t k = 0; k < classes; ++k) {
                pr[k * plane + p] = std::exp(z[k * plane + p] - mx);
                s += pr[k * plane + p];
            }
            for (std::size_t k = 0; k < classes; ++k) pr[k * plane + p] /= s;
            const double pt = pr[static_cast<std::size_t>(labels[n * plane + p]) * plane + p];
            if (pt < floor) (*floored)[n * plane + p] = 1;
            total -= std::log(std::max(pt, floor));
        }
    }
    const double pixels = static_cast<double>(batch * plane);
    std::vector<std::int32_t> label_copy(labels.begin(), labels.end());
    return Tensor::make_result(
        {1}, {total / pixels}, {logits},
        [probs, floored, label_copy = std::move(label_copy), batch, classes, plane, pixels](detail::Node& self) {
            auto g = self.inputs[0]->ensure_grad();
            const double upstream = self.grad[0] / pixels;
            for (std::size_t n = 0; n < batch; ++n)
                for (std::size_t p = 0; p < plane; ++p) {
                    // The floor clamps the loss; below it the term is constant.
                    if ((*floored)[n * plane + p]) continue;
                    const auto y = static_cast<std::size_t>(label_copy[n * plane + p]);
                    for (std::size_t k = 0; k < classes; ++k) {
                        const std::size_t idx = (n * classes + k) * plane + p;
                        g[idx] += upstream * ((*probs)[idx] - (k == y ? 1.0 : 0.0));
                    }
                }
        });
}

}  // namespace sephr
