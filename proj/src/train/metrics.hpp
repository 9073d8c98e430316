#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace sephr {

// K x K pixel counts, rows = truth, cols = prediction.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t classes) : k_(classes), counts_(classes * classes, 0) {}

    void add(std::span<const std::int32_t> pred, std::span<const std::int32_t> truth);
    void merge(const ConfusionMatrix& other);

    std::size_t classes() const { return k_; }
    std::uint64_t at(std::size_t truth, std::size_t pred) const { return counts_[truth * k_ + pred]; }
    std::uint64_t total() const;
    std::uint64_t trace() const;

private:
    std::size_t k_;
    std::vector<std::uint64_t> counts_;
};

struct SegmentationMetrics {
    double accuracy = 0.0;
    std::vector<double> precision, recall, f1, iou;
    double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
    double miou = 0.0;
    std::vector<std::vector<std::uint64_t>> confusion;
    std::uint64_t pixels = 0;
};

// Per-class precision and recall are 0 when undefined (no predictions or no
// truth pixels). Macro averages and mIoU run over the classes present in
// truth or prediction.
SegmentationMetrics metrics_from_confusion(const ConfusionMatrix& cm);
SegmentationMetrics compute_metrics(std::span<const std::int32_t> pred, std::span<const std::int32_t> truth,
                                    std::size_t classes);

}  // namespace sephr
