#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "data/dataset.hpp"
#include "model/model.hpp"
#include "train/metrics.hpp"

namespace sephr {

struct TrainConfig {
    double lr = 1e-4;
    std::size_t batch_size = 8;
    double weight_decay = 1e-4;
    std::size_t epochs = 30;
    std::uint64_t seed = 0;
    double train_fraction = 0.8;
    // Random flips and transposes of each training scene, drawn per epoch.
    bool augment = false;

    void validate() const;
    KeyValues to_keyvalues() const;
    static TrainConfig from_keyvalues(const KeyValues& kv);
};

struct Split {
    std::vector<std::size_t> train, holdout;
};

// Seeded permutation; the first floor(fraction * n) items (at least one)
// train, the rest are held out.
Split split_indices(std::size_t n, double fraction, std::uint64_t seed);

struct EpochRecord {
    std::size_t epoch = 0;
    double lr = 0.0, loss = 0.0;
    SegmentationMetrics train;                   // training items, eval mode, after the epoch
    std::optional<SegmentationMetrics> holdout;  // held-out items, if any
};

struct TrainOutputs {
    std::string log_path;        // per-epoch CSV over the training items
    std::string holdout_path;    // per-epoch CSV over held-out items
    std::string checkpoint_dir;  // best.ckpt and final.ckpt
    bool quiet = true;
};

struct TrainResult {
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;
    ChannelStats stats;
};

std::string metrics_csv_header();
std::string epoch_csv_line(const EpochRecord& r);

// Trains on data.scenes[train] with statistics from those scenes; best
// checkpoint chosen by held-out mIoU (training mIoU when nothing is held out).
TrainResult train_on(SegmentationModel& model, const Dataset& data, std::span<const std::size_t> train,
                     std::span<const std::size_t> holdout, const TrainConfig& cfg, const TrainOutputs& out = {});
TrainResult train(SegmentationModel& model, const Dataset& data, const TrainConfig& cfg,
                  const TrainOutputs& out = {});

// Stacks scenes into [B, T, C, H, W] after applying the model's band
// statistics; labels are concatenated.
Tensor batch_frames(const SegmentationModel& model, const Dataset& data, std::span<const std::size_t> indices);
std::vector<std::int32_t> batch_labels(const Dataset& data, std::span<const std::size_t> indices);

// One of the eight symmetries of the square grid: bit 0 flips rows, bit 1
// flips columns, bit 2 transposes (square scenes only).
SceneSequence dihedral(const SceneSequence& scene, unsigned transform);

// Eval-mode logits [N, K, H, W] for the given scenes.
Tensor predict_logits(SegmentationModel& model, const Dataset& data, std::span<const std::size_t> indices,
                      std::size_t batch_size = 8);

struct Evaluation {
    SegmentationMetrics metrics;
    std::vector<std::int32_t> predictions;  // N x H x W
};

Evaluation evaluate(SegmentationModel& model, const Dataset& data, std::span<const std::size_t> indices,
                    std::size_t batch_size = 8);

std::vector<std::size_t> all_indices(std::size_t n);

}  // namespace sephr
