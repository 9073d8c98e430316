#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "model/decoder.hpp"
#include "model/encoder.hpp"
#include "model/temporal.hpp"
#include "util/keyvalue.hpp"

namespace sephr {

enum class Paradigm {
    ed,   // decode every frame, average the logit maps
    eld,  // stacked bidirectional LSTM over frame embeddings
    esd,  // multi-head self-attention over q/k/v frame embeddings
};

std::string paradigm_name(Paradigm p);
Paradigm parse_paradigm(const std::string& name);

struct ModelConfig {
    Paradigm paradigm = Paradigm::esd;
    EncoderConfig encoder;
    AttentionConfig attention;
    LstmConfig lstm;
    DecoderConfig decoder;

    // Copies shared sizes (embedding width, extent, class count, heads) from
    // the encoder into the other parts, then validates everything.
    ModelConfig resolved() const;

    KeyValues to_keyvalues() const;
    static ModelConfig from_keyvalues(const KeyValues& kv);
};

class SegmentationModel {
public:
    SegmentationModel(const ModelConfig& cfg, std::uint64_t seed);

    // frames: [B, T, C, H, W] -> logits [B, K, H, W].
    Tensor forward(const Tensor& frames, NormMode mode);

    const ModelConfig& config() const { return cfg_; }
    ParameterSet& parameters() { return *params_; }
    const ParameterSet& parameters() const { return *params_; }
    std::size_t param_count() const { return params_->param_count(); }
    Encoder& encoder() { return *encoder_; }

    // Per-band statistics of the data the model was trained on.
    void set_normalization(const std::vector<double>& mean, const std::vector<double>& stddev);
    std::vector<double> norm_mean() const;
    std::vector<double> norm_std() const;

    void save(const std::string& path, const std::string& extra_metadata = {}) const;
    static SegmentationModel load(const std::string& path);
    // Archive metadata of a loaded checkpoint (empty for fresh models).
    const std::string& metadata() const { return metadata_; }

private:
    ModelConfig cfg_;
    std::unique_ptr<ParameterSet> params_;
    std::unique_ptr<Encoder> encoder_;
    std::unique_ptr<MultiHeadAttention> attention_;
    std::unique_ptr<Lstm> lstm_;
    std::unique_ptr<Decoder> decoder_;
    Tensor norm_mean_, norm_std_;
    std::string metadata_;
};

}  // namespace sephr
