#include "train/metrics.hpp"

#include "tensor/error.hpp"

namespace sephr {

void ConfusionMatrix::add(std::span<const std::int32_t> pred, std::span<const std::int32_t> truth) {
    SEPHR_CHECK(pred.size() == truth.size(), ErrorKind::config, "prediction has ", pred.size(),
                " pixels, truth has ", truth.size());
    const auto k = static_cast<std::int32_t>(k_);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        SEPHR_CHECK(truth[i] >= 0 && truth[i] < k && pred[i] >= 0 && pred[i] < k, ErrorKind::data, "pixel ", i,
                    " has label outside [0, ", k_, ")");
        ++counts_[static_cast<std::size_t>(truth[i]) * k_ + static_cast<std::size_t>(pred[i])];
    }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
    SEPHR_CHECK(other.k_ == k_, ErrorKind::config, "cannot merge confusion matrices of different sizes");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t n = 0;
    for (auto c : counts_) n += c;
    return n;
}

std::uint64_t ConfusionMatrix::trace() const {
    std::uint64_t n = 0;
    for (std::size_t i = 0; i < k_; ++i) n += at(i, i);
    return n;
}

SegmentationMetrics metrics_from_confusion(const ConfusionMatrix& cm) {
    const std::size_t k = cm.classes();
    SegmentationMetrics m;
    m.pixels = cm.total();
    m.accuracy = m.pixels ? static_cast<double>(cm.trace()) / static_cast<double>(m.pixels) : 0.0;
    m.confusion.assign(k, std::vector<std::uint64_t>(k));
    double iou_sum = 0.0;
    std::size_t present = 0;
    for (std::size_t c = 0; c < k; ++c) {
        std::uint64_t row = 0, col = 0;
        for (std::size_t j = 0; j < k; ++j) {
            m.confusion[c][j] = cm.at(c, j);
            row += cm.at(c, j);
            col += cm.at(j, c);
        }
        const double tp = static_cast<double>(cm.at(c, c));
        const double p = col ? tp / static_cast<double>(col) : 0.0;
        const double r = row ? tp / static_cast<double>(row) : 0.0;
        m.precision.push_back(p);
        m.recall.push_back(r);
        m.f1.push_back(p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0);
        const std::uint64_t uni = row + col - cm.at(c, c);
        m.iou.push_back(uni ? tp / static_cast<double>(uni) : 0.0);
        if (uni) {
            iou_sum += m.iou.back();
            m.macro_precision += p;
            m.macro_recall += r;
            m.macro_f1 += m.f1.back();
            ++present;
        }
    }
    if (present) {
        const double n = static_cast<double>(present);
        m.miou = iou_sum / n;
        m.macro_precision /= n;
        m.macro_recall /= n;
        m.macro_f1 /= n;
    }
    return m;
}

SegmentationMetrics compute_metrics(std::span<const std::int32_t> pred, std::span<const std::int32_t> truth,
                                    std::size_t classes) {
    ConfusionMatrix cm(classes);
    cm.add(pred, truth);
    return metrics_from_confusion(cm);
}

}  // namespace sephr
