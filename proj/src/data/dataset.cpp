#include "data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <tuple>

namespace sephr {

void GeneratorConfig::validate() const {
    SEPHR_CHECK(classes >= 2, ErrorKind::config, "the generator needs at least two classes, got ", classes);
    SEPHR_CHECK(frames >= 1 && bands >= 1 && height >= 1 && width >= 1, ErrorKind::config,
                "scene extents must be positive");
    SEPHR_CHECK(noise >= 0.0, ErrorKind::config, "noise level must be non-negative");
}

double PhenologyProfile::at(double tau) const {
    const double z = (tau - peak) / width;
    return base + amplitude * std::exp(-0.5 * z * z);
}

std::vector<std::vector<PhenologyProfile>> phenology_table(std::size_t classes, std::size_t bands) {
    std::vector<std::vector<PhenologyProfile>> table(classes, std::vector<PhenologyProfile>(bands));
    for (std::size_t b = 0; b < bands; ++b) {
        table[0][b] = {0.45, 0.4, 0.3, 0.1};
        table[1][b] = {0.45, 0.4, 0.7, 0.1};
    }
    for (std::size_t c = 2; c < classes; ++c) {
        const std::size_t j = c - 2;
        const std::size_t high = j % bands, second = (j / bands + high + 1) % bands;
        for (std::size_t b = 0; b < bands; ++b) {
            const bool lit = b == high || (j >= bands && b == second);
            table[c][b] = {lit ? 0.75 : 0.15, 0.0, 0.5, 0.1};
        }
    }
    return table;
}

double frame_time(std::size_t t, std::size_t frames) {
    return (static_cast<double>(t) + 0.5) / static_cast<double>(frames);
}

std::uint64_t derive_seed(std::uint64_t seed, std::size_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

KeyValues GeneratorConfig::to_keyvalues() const {
    KeyValues kv;
    kv.set("data.frames", std::to_string(frames));
    kv.set("data.bands", std::to_string(bands));
    kv.set("data.height", std::to_string(height));
    kv.set("data.width", std::to_string(width));
    kv.set("data.classes", std::to_string(classes));
    kv.set("data.noise", format_real(noise));
    return kv;
}

GeneratorConfig GeneratorConfig::from_keyvalues(const KeyValues& kv) {
    GeneratorConfig c;
    c.frames = kv.size("data.frames", c.frames);
    c.bands = kv.size("data.bands", c.bands);
    c.height = kv.size("data.height", c.height);
    c.width = kv.size("data.width", c.width);
    c.classes = kv.size("data.classes", c.classes);
    c.noise = kv.real("data.noise", c.noise);
    return c;
}

SceneSequence generate_scene(std::uint64_t seed, const GeneratorConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 1.0);
    const std::size_t h = cfg.height, w = cfg.width, k = cfg.classes;

    std::vector<double> sy(k), sx(k);
    for (std::size_t c = 0; c < k; ++c) {
        sy[c] = unit(rng) * static_cast<double>(h);
        sx[c] = unit(rng) * static_cast<double>(w);
    }
    LabelMap labels{h, w, std::vector<std::int32_t>(h * w)};
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            std::size_t best = 0;
            double bd = 0.0;
            for (std::size_t c = 0; c < k; ++c) {
                const double dy = static_cast<double>(y) + 0.5 - sy[c], dx = static_cast<double>(x) + 0.5 - sx[c];
                const double d = dy * dy + dx * dx;
                if (c == 0 || d < bd) {
                    bd = d;
                    best = c;
                }
            }
            labels.values[y * w + x] = static_cast<std::int32_t>(best);
        }

    const auto table = phenology_table(k, cfg.bands);
    std::vector<double> v(cfg.frames * cfg.bands * h * w);
    std::size_t i = 0;
    for (std::size_t t = 0; t < cfg.frames; ++t) {
        const double tau = frame_time(t, cfg.frames);
        for (std::size_t b = 0; b < cfg.bands; ++b)
            for (std::size_t p = 0; p < h * w; ++p)
                v[i++] = table[static_cast<std::size_t>(labels.values[p])][b].at(tau) + cfg.noise * noise(rng);
    }
    return {Tensor::from({cfg.frames, cfg.bands, h, w}, std::move(v)), std::move(labels), seed};
}

Dataset generate_dataset(std::uint64_t seed, std::size_t count, const GeneratorConfig& cfg) {
    Dataset data;
    for (std::size_t i = 0; i < count; ++i) data.scenes.push_back(generate_scene(derive_seed(seed, i), cfg));
    return data;
}

ChannelStats channel_stats(const Dataset& data, std::span<const std::size_t> indices) {
    SEPHR_CHECK(!indices.empty(), ErrorKind::data, "normalization needs a non-empty dataset");
    const std::size_t c = data.scenes[indices[0]].n_bands();
    std::vector<double> sum(c, 0.0), sq(c, 0.0);
    std::size_t count = 0;
    for (auto idx : indices) {
        const auto& f = data.scenes[idx].frames;
        SEPHR_CHECK(f.dim(1) == c, ErrorKind::data, "scene ", idx, " has ", f.dim(1), " bands, expected ", c);
        const std::size_t t = f.dim(0), hw = f.dim(2) * f.dim(3);
        const auto v = f.values();
        for (std::size_t ti = 0; ti < t; ++ti)
            for (std::size_t b = 0; b < c; ++b)
                for (std::size_t p = 0; p < hw; ++p) sum[b] += v[(ti * c + b) * hw + p];
        count += t * hw;
    }
    ChannelStats s;
    for (std::size_t b = 0; b < c; ++b) s.mean.push_back(sum[b] / static_cast<double>(count));
    for (auto idx : indices) {
        const auto& f = data.scenes[idx].frames;
        const std::size_t t = f.dim(0), hw = f.dim(2) * f.dim(3);
        const auto v = f.values();
        for (std::size_t ti = 0; ti < t; ++ti)
            for (std::size_t b = 0; b < c; ++b)
                for (std::size_t p = 0; p < hw; ++p) {
                    const double d = v[(ti * c + b) * hw + p] - s.mean[b];
                    sq[b] += d * d;
                }
    }
    for (std::size_t b = 0; b < c; ++b) {
        double sd = std::sqrt(sq[b] / static_cast<double>(count));
        if (sd < kStdFloor) {
            sd = kStdFloor;
            ++s.floored;
        }
        s.stddev.push_back(sd);
    }
    return s;
}

ChannelStats channel_stats(const Dataset& data) {
    std::vector<std::size_t> all(data.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return channel_stats(data, all);
}

namespace {

Tensor map_bands(const Tensor& frames, const ChannelStats& stats, bool forward) {
    SEPHR_CHECK(frames.rank() >= 3, ErrorKind::config, "frames must be [..., C, H, W], got ",
                shape_str(frames.shape()));
    const std::size_t c = frames.dim(frames.rank() - 3);
    SEPHR_CHECK(stats.mean.size() == c && stats.stddev.size() == c, ErrorKind::config, "statistics cover ",
                stats.mean.size(), " bands, frames have ", c);
    const std::size_t hw = frames.dim(frames.rank() - 2) * frames.dim(frames.rank() - 1);
    std::vector<double> v(frames.values().begin(), frames.values().end());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const std::size_t b = (i / hw) % c;
        if (forward)
            v[i] = stats.stddev[b] <= kStdFloor ? 0.0 : (v[i] - stats.mean[b]) / stats.stddev[b];
        else
            v[i] = v[i] * stats.stddev[b] + stats.mean[b];
    }
    return Tensor::from(frames.shape(), std::move(v));
}

}  // namespace

Tensor normalize_frames(const Tensor& frames, const ChannelStats& stats) { return map_bands(frames, stats, true); }

Tensor denormalize_frames(const Tensor& frames, const ChannelStats& stats) {
    return map_bands(frames, stats, false);
}

void normalize_in_place(Dataset& data, const ChannelStats& stats) {
    for (auto& s : data.scenes) s.frames = normalize_frames(s.frames, stats);
}

Tensor resize_frame(const Tensor& frame, std::size_t height, std::size_t width, ResizeMode mode) {
    SEPHR_CHECK(frame.rank() == 3, ErrorKind::config, "resize expects a [C, H, W] frame, got ",
                shape_str(frame.shape()));
    SEPHR_CHECK(height >= 1 && width >= 1, ErrorKind::config, "resize target must be at least 1x1");
    const std::size_t c = frame.dim(0), ih = frame.dim(1), iw = frame.dim(2);
    const auto src = frame.values();
    std::vector<double> out(c * height * width, 0.0);
    if (mode == ResizeMode::pad) {
        SEPHR_CHECK(height >= ih && width >= iw, ErrorKind::config, "pad resize cannot shrink ", ih, "x", iw, " to ",
                    height, "x", width);
        const std::size_t oy = (height - ih) / 2, ox = (width - iw) / 2;
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t y = 0; y < ih; ++y)
                for (std::size_t x = 0; x < iw; ++x)
                    out[(ch * height + y + oy) * width + x + ox] = src[(ch * ih + y) * iw + x];
        return Tensor::from({c, height, width}, std::move(out));
    }
    auto coord = [](std::size_t dst, std::size_t in, std::size_t outn) {
        double s = (static_cast<double>(dst) + 0.5) * static_cast<double>(in) / static_cast<double>(outn) - 0.5;
        s = std::clamp(s, 0.0, static_cast<double>(in - 1));
        const auto lo = static_cast<std::size_t>(std::floor(s));
        const std::size_t hi = std::min(lo + 1, in - 1);
        return std::tuple{lo, hi, s - static_cast<double>(lo)};
    };
    for (std::size_t y = 0; y < height; ++y) {
        const auto [y0, y1, fy] = coord(y, ih, height);
        for (std::size_t x = 0; x < width; ++x) {
            const auto [x0, x1, fx] = coord(x, iw, width);
            for (std::size_t ch = 0; ch < c; ++ch) {
                auto at = [&](std::size_t yy, std::size_t xx) { return src[(ch * ih + yy) * iw + xx]; };
                const double top = at(y0, x0) * (1 - fx) + at(y0, x1) * fx;
                const double bottom = at(y1, x0) * (1 - fx) + at(y1, x1) * fx;
                out[(ch * height + y) * width + x] = top * (1 - fy) + bottom * fy;
            }
        }
    }
    return Tensor::from({c, height, width}, std::move(out));
}

LabelMap resize_labels(const LabelMap& labels, std::size_t height, std::size_t width, ResizeMode mode,
                       std::int32_t fill) {
    SEPHR_CHECK(height >= 1 && width >= 1, ErrorKind::config, "resize target must be at least 1x1");
    const std::size_t ih = labels.height, iw = labels.width;
    LabelMap out{height, width, std::vector<std::int32_t>(height * width, fill)};
    if (mode == ResizeMode::pad) {
        SEPHR_CHECK(height >= ih && width >= iw, ErrorKind::config, "pad resize cannot shrink ", ih, "x", iw, " to ",
                    height, "x", width);
        const std::size_t oy = (height - ih) / 2, ox = (width - iw) / 2;
        for (std::size_t y = 0; y < ih; ++y)
            for (std::size_t x = 0; x < iw; ++x) out.values[(y + oy) * width + x + ox] = labels.values[y * iw + x];
        return out;
    }
    for (std::size_t y = 0; y < height; ++y) {
        const std::size_t sy = std::min(ih - 1, (2 * y + 1) * ih / (2 * height));
        for (std::size_t x = 0; x < width; ++x) {
            const std::size_t sx = std::min(iw - 1, (2 * x + 1) * iw / (2 * width));
            out.values[y * width + x] = labels.values[sy * iw + sx];
        }
    }
    return out;
}

namespace {

constexpr char kDatasetMagic[4] = {'S', 'P', 'S', 'T'};

void write_scene(BinaryWriter& w, const SceneSequence& s) {
    w.u64(s.scene_id);
    write_tensor_record(w, s.frames);
    write_label_record(w, s.labels);
}

}  // namespace

void save_dataset(const std::string& path, const Dataset& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    SEPHR_CHECK(out, ErrorKind::io, "cannot write dataset '", path, "'");
    BinaryWriter w(out);
    w.bytes(kDatasetMagic, 4);
    w.u32(kDatasetVersion);
    w.u64(data.size());
    for (const auto& s : data.scenes) write_scene(w, s);
    SEPHR_CHECK(out.good(), ErrorKind::io, "failed while writing dataset '", path, "'");
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    SEPHR_CHECK(in, ErrorKind::io, "cannot open dataset '", path, "'");
    BinaryReader r(in, ErrorKind::dataset_format);
    char magic[4];
    r.bytes(magic, 4, "dataset magic");
    SEPHR_CHECK(std::equal(magic, magic + 4, kDatasetMagic), ErrorKind::dataset_format, "'", path,
                "' is not a dataset file (bad magic)");
    const auto version = r.u32("dataset version");
    SEPHR_CHECK(version == kDatasetVersion, ErrorKind::dataset_format, "dataset '", path, "' has format version ",
                version, ", this build reads ", kDatasetVersion);
    const auto count = r.u64("scene count");
    Dataset data;
    for (std::uint64_t i = 0; i < count; ++i) {
        SceneSequence s;
        s.scene_id = r.u64("scene id");
        s.frames = read_tensor_record(r);
        s.labels = read_label_record(r);
        SEPHR_CHECK(s.frames.rank() == 4 && s.frames.dim(2) == s.labels.height && s.frames.dim(3) == s.labels.width,
                    ErrorKind::dataset_format, "scene ", i, " frames ", shape_str(s.frames.shape()),
                    " do not match its ", s.labels.height, "x", s.labels.width, " labels");
        data.scenes.push_back(std::move(s));
    }
    return data;
}

std::uint64_t scene_hash(const SceneSequence& scene) {
    std::ostringstream os;
    BinaryWriter w(os);
    write_scene(w, scene);
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : os.str()) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace sephr
