#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tensor/serialize.hpp"
#include "util/keyvalue.hpp"

namespace sephr {

struct SceneSequence {
    Tensor frames;  // [T, C, H, W]
    LabelMap labels;
    std::uint64_t scene_id = 0;

    std::size_t n_frames() const { return frames.dim(0); }
    std::size_t n_bands() const { return frames.dim(1); }
};

struct GeneratorConfig {
    std::size_t frames = 8, bands = 4, height = 32, width = 32, classes = 6;
    double noise = 0.1;

    void validate() const;
    KeyValues to_keyvalues() const;
    static GeneratorConfig from_keyvalues(const KeyValues& kv);
};

// Reflectance of one class in one band over the season: a constant level
// plus a Gaussian bump, evaluated at normalized time tau in (0, 1).
struct PhenologyProfile {
    double base = 0.0, amplitude = 0.0, peak = 0.5, width = 0.1;

    double at(double tau) const;
};

// [class][band]. Classes 0 and 1 share every level and differ only in peak
// time, placed symmetrically about mid-season so their time averages agree.
std::vector<std::vector<PhenologyProfile>> phenology_table(std::size_t classes, std::size_t bands);

// Normalized time of frame t out of T (frame centres).
double frame_time(std::size_t t, std::size_t frames);

// Voronoi field layout from one site per class, pixel values from the class
// profiles plus Gaussian noise.
SceneSequence generate_scene(std::uint64_t seed, const GeneratorConfig& cfg);

struct Dataset {
    std::vector<SceneSequence> scenes;

    std::size_t size() const { return scenes.size(); }
};

// Scene i is generated from derive_seed(seed, i), a seed_seq mix of both.
Dataset generate_dataset(std::uint64_t seed, std::size_t count, const GeneratorConfig& cfg);
std::uint64_t derive_seed(std::uint64_t seed, std::size_t index);

struct ChannelStats {
    std::vector<double> mean, stddev;
    std::size_t floored = 0;  // channels whose std hit the floor
};

inline constexpr double kStdFloor = 1e-8;

// Per-band mean and population std over every pixel and frame of the given
// scenes.
ChannelStats channel_stats(const Dataset& data, std::span<const std::size_t> indices);
ChannelStats channel_stats(const Dataset& data);
// (x - mean) / std per band.
Tensor normalize_frames(const Tensor& frames, const ChannelStats& stats);
Tensor denormalize_frames(const Tensor& frames, const ChannelStats& stats);
void normalize_in_place(Dataset& data, const ChannelStats& stats);

enum class ResizeMode { bilinear, pad };

// frame: [C, H, W]. Bilinear uses half-pixel centres; pad centres the image
// on a zero canvas and never crops.
Tensor resize_frame(const Tensor& frame, std::size_t height, std::size_t width, ResizeMode mode);
// Nearest neighbour for bilinear mode, centring with fill for pad mode.
LabelMap resize_labels(const LabelMap& labels, std::size_t height, std::size_t width, ResizeMode mode,
                       std::int32_t fill = 0);

// Container: "SPST", u32 version, u64 count, then per scene u64 id, tensor
// record of the frames and label record.
inline constexpr std::uint32_t kDatasetVersion = 1;

void save_dataset(const std::string& path, const Dataset& data);
Dataset load_dataset(const std::string& path);

// FNV-1a over a scene's serialized bytes.
std::uint64_t scene_hash(const SceneSequence& scene);

}  // namespace sephr
