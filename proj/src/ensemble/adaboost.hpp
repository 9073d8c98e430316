#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "train/trainer.hpp"

namespace sephr {

// +1 when the misclassified fraction is strictly above theta, else -1.
int sample_error(std::span<const std::int32_t> pred, std::span<const std::int32_t> truth, double theta);

inline constexpr double kEpsilonClamp = 1e-6;

struct ReweightResult {
    std::vector<double> probs;
    double epsilon = 0.0;  // weighted error after clamping
    double alpha = 0.0;
    bool degenerate = false;  // epsilon hit a clamp bound
};

// eps = sum p_i [e_i = +1] clamped to [1e-6, 1 - 1e-6]; alpha = ln((1 - eps) / eps) / 2;
// p_i <- p_i exp(alpha e_i), renormalized.
ReweightResult adaboost_reweight(std::span<const double> probs, std::span<const int> errors);

// Systematic probability-proportional sampling of `count` distinct items.
// Inclusion probabilities are count * p_i, capped at 1 with the excess
// redistributed over the remaining items.
std::vector<std::size_t> systematic_sample(std::span<const double> probs, std::size_t count, double start);

struct EnsembleMember {
    std::string checkpoint;  // empty when the member lives only in memory
    double alpha = 0.0;
    std::shared_ptr<SegmentationModel> model;
};

struct RoundRecord {
    std::vector<std::size_t> subset;  // positions into the training item list
    std::vector<int> errors;          // per training item
    double epsilon = 0.0, alpha = 0.0;
    bool degenerate = false;
};

struct EnsembleModel {
    std::vector<EnsembleMember> members;
    std::vector<double> sample_probs;  // over the training items
    double theta = 0.2;
    std::uint64_t seed = 0;
    std::vector<RoundRecord> rounds;
    std::string metadata;  // extra key = value lines carried in the manifest
};

struct AdaBoostConfig {
    std::size_t members = 5;
    double theta = 0.2;
    double subset_fraction = 0.8;
    std::uint64_t seed = 0;

    void validate() const;
    KeyValues to_keyvalues() const;
    static AdaBoostConfig from_keyvalues(const KeyValues& kv);
};

// Trains one base model on the given scenes and returns it. The default
// builds SegmentationModel(model_cfg, seed) and runs train_on.
using BaseTrainer = std::function<std::shared_ptr<SegmentationModel>(std::span<const std::size_t> items,
                                                                     std::size_t round, std::uint64_t seed)>;

BaseTrainer default_base_trainer(const Dataset& data, const ModelConfig& model_cfg, const TrainConfig& train_cfg);

// items: dataset indices forming the ensemble's training set. When
// checkpoint_dir is non-empty each member is saved as member<m>.ckpt.
EnsembleModel adaboost_train(const Dataset& data, std::span<const std::size_t> items, const AdaBoostConfig& cfg,
                             const BaseTrainer& trainer, const std::string& checkpoint_dir = {});

// Vote weights: max(alpha, 0); if every weight is zero, members vote equally.
std::vector<double> vote_weights(const EnsembleModel& ens);

// Per-pixel score sum_m w_m softmax(logits_m) over the class axis.
// member_logits: each [N, K, H, W] or [K, H, W].
Tensor combine_scores(std::span<const Tensor> member_logits, std::span<const double> weights);

struct EnsemblePrediction {
    Tensor scores;                     // [N, K, H, W]
    std::vector<std::int32_t> labels;  // N x H x W
};

EnsemblePrediction ensemble_predict(const EnsembleModel& ens, const Dataset& data,
                                    std::span<const std::size_t> indices, std::size_t batch_size = 8);

// Manifest in the flat key = value format: ensemble.* settings, then
// member.<m>.checkpoint / member.<m>.alpha, and the sample probabilities.
void save_manifest(const std::string& path, const EnsembleModel& ens);
// Loads the manifest and every member checkpoint (paths relative to the
// manifest's directory unless absolute).
EnsembleModel load_manifest(const std::string& path);

}  // namespace sephr
