#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "data/dataset.hpp"

using namespace sephr;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

template <class F>
ErrorKind kind_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no error raised";
    return ErrorKind::usage;
}

}  // namespace

TEST(Generator, NoiselessTwoClassesSplitByThresholdAtPeakFrame) {
    GeneratorConfig cfg;
    cfg.classes = 2;
    cfg.noise = 0.0;
    cfg.frames = 10;
    const auto s = generate_scene(3, cfg);
    // Class 0 peaks early, class 1 late: frame 2 (tau 0.25) separates them.
    const std::size_t hw = cfg.height * cfg.width;
    const auto v = s.frames.values();
    const double cut = 0.45 + 0.2;
    for (std::size_t p = 0; p < hw; ++p) {
        const double x = v[(2 * cfg.bands + 0) * hw + p];
        EXPECT_EQ(x > cut ? 0 : 1, s.labels.values[p]) << "pixel " << p;
    }
}

TEST(Generator, ConfusableClassesShareTimeAveragedMean) {
    GeneratorConfig cfg;
    const auto data = generate_dataset(5, 20, cfg);
    const std::size_t hw = cfg.height * cfg.width;
    double sum[2][4] = {}, count[2] = {};
    for (const auto& s : data.scenes) {
        const auto v = s.frames.values();
        for (std::size_t p = 0; p < hw; ++p) {
            const auto c = s.labels.values[p];
            if (c > 1) continue;
            count[c] += static_cast<double>(cfg.frames);
            for (std::size_t t = 0; t < cfg.frames; ++t)
                for (std::size_t b = 0; b < cfg.bands; ++b) sum[c][b] += v[(t * cfg.bands + b) * hw + p];
        }
    }
    ASSERT_GT(count[0], 1000.0);
    ASSERT_GT(count[1], 1000.0);
    for (std::size_t b = 0; b < 4; ++b) {
        const double se = 0.1 * std::sqrt(1.0 / count[0] + 1.0 / count[1]);
        EXPECT_LT(std::abs(sum[0][b] / count[0] - sum[1][b] / count[1]), 5.0 * se) << "band " << b;
    }
}

TEST(Generator, TimeAveragedLogisticClassifierStaysNearChance) {
    GeneratorConfig cfg;
    const auto data = generate_dataset(6, 40, cfg);
    const std::size_t hw = cfg.height * cfg.width;
    std::vector<std::array<double, 5>> x;
    std::vector<int> y;
    for (const auto& s : data.scenes) {
        const auto v = s.frames.values();
        for (std::size_t p = 0; p < hw; ++p) {
            const auto c = s.labels.values[p];
            if (c > 1) continue;
            std::array<double, 5> f{1, 0, 0, 0, 0};
            for (std::size_t t = 0; t < cfg.frames; ++t)
                for (std::size_t b = 0; b < cfg.bands; ++b) f[b + 1] += v[(t * cfg.bands + b) * hw + p] / 8.0;
            x.push_back(f);
            y.push_back(c);
        }
    }
    const std::size_t half = x.size() / 2;
    std::array<double, 5> w{};
    for (int it = 0; it < 300; ++it) {
        std::array<double, 5> g{};
        for (std::size_t i = 0; i < half; ++i) {
            double z = 0.0;
            for (std::size_t j = 0; j < 5; ++j) z += w[j] * x[i][j];
            const double r = 1.0 / (1.0 + std::exp(-z)) - y[i];
            for (std::size_t j = 0; j < 5; ++j) g[j] += r * x[i][j] / static_cast<double>(half);
        }
        for (std::size_t j = 0; j < 5; ++j) w[j] -= 2.0 * g[j];
    }
    std::size_t correct = 0, ones = 0;
    for (std::size_t i = half; i < x.size(); ++i) {
        double z = 0.0;
        for (std::size_t j = 0; j < 5; ++j) z += w[j] * x[i][j];
        correct += (z > 0) == (y[i] == 1);
        ones += y[i];
    }
    const double n = static_cast<double>(x.size() - half);
    const double chance = std::max(ones, x.size() - half - ones) / n;
    EXPECT_LT(static_cast<double>(correct) / n, chance + 0.10);
}

TEST(Generator, SameSeedIsBitIdentical) {
    GeneratorConfig cfg;
    const auto a = generate_scene(42, cfg), b = generate_scene(42, cfg);
    ASSERT_EQ(a.frames.numel(), b.frames.numel());
    for (std::size_t i = 0; i < a.frames.numel(); ++i) ASSERT_EQ(a.frames.values()[i], b.frames.values()[i]);
    EXPECT_EQ(a.labels.values, b.labels.values);
    EXPECT_NE(generate_scene(43, cfg).labels.values, a.labels.values);
}

TEST(Generator, EveryClassAppearsAtDefaults) {
    GeneratorConfig cfg;
    std::size_t complete = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto s = generate_scene(derive_seed(11, seed), cfg);
        std::vector<bool> seen(cfg.classes, false);
        for (auto l : s.labels.values) {
            ASSERT_GE(l, 0);
            ASSERT_LT(l, static_cast<int>(cfg.classes));
            seen[static_cast<std::size_t>(l)] = true;
        }
        complete += std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
    }
    EXPECT_GE(complete, 99u);
}

TEST(Generator, ProfilesStayInUnitInterval) {
    for (const auto& row : phenology_table(12, 4))
        for (const auto& p : row)
            for (int i = 0; i <= 100; ++i) {
                const double v = p.at(i / 100.0);
                EXPECT_GE(v, 0.0);
                EXPECT_LE(v, 1.0);
            }
}

TEST(Generator, OneClassIsConfigError) {
    GeneratorConfig cfg;
    cfg.classes = 1;
    EXPECT_EQ(kind_of([&] { generate_scene(0, cfg); }), ErrorKind::config);
}

TEST(Normalize, TrainingChannelsBecomeStandard) {
    GeneratorConfig cfg;
    auto data = generate_dataset(1, 6, cfg);
    const auto stats = channel_stats(data);
    normalize_in_place(data, stats);
    const auto after = channel_stats(data);
    for (std::size_t b = 0; b < 4; ++b) {
        EXPECT_NEAR(after.mean[b], 0.0, 1e-6);
        EXPECT_NEAR(after.stddev[b], 1.0, 1e-6);
    }
}

TEST(Normalize, HeldOutScenesUseTrainingStatistics) {
    GeneratorConfig cfg;
    const auto data = generate_dataset(2, 6, cfg);
    const std::vector<std::size_t> train{0, 1, 2, 3};
    const auto stats = channel_stats(data, train);
    const auto own = channel_stats(data, std::vector<std::size_t>{4, 5});
    const auto x = normalize_frames(data.scenes[5].frames, stats);
    const std::size_t hw = cfg.height * cfg.width;
    const auto v = data.scenes[5].frames.values();
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const std::size_t b = (i / hw) % 4;
        ASSERT_EQ(x.values()[i], (v[i] - stats.mean[b]) / stats.stddev[b]);
    }
    EXPECT_NE(stats.mean[0], own.mean[0]);
}

TEST(Normalize, ConstantChannelIsFlooredAndMapsToZero) {
    Dataset data;
    data.scenes.push_back({Tensor::full({2, 1, 3, 3}, 0.4), LabelMap{3, 3, std::vector<std::int32_t>(9, 0)}, 0});
    const auto stats = channel_stats(data);
    EXPECT_EQ(stats.floored, 1u);
    EXPECT_EQ(stats.stddev[0], kStdFloor);
    const auto out = normalize_frames(data.scenes[0].frames, stats);
    for (double v : out.values()) EXPECT_EQ(v, 0.0);
}

TEST(Normalize, InverseRecoversInput) {
    GeneratorConfig cfg;
    const auto data = generate_dataset(3, 3, cfg);
    const auto stats = channel_stats(data);
    const auto& f = data.scenes[1].frames;
    const auto back = denormalize_frames(normalize_frames(f, stats), stats);
    for (std::size_t i = 0; i < f.numel(); ++i) ASSERT_NEAR(back.values()[i], f.values()[i], 1e-9);
}

TEST(Resize, SameExtentIsIdentity) {
    GeneratorConfig cfg;
    const auto s = generate_scene(4, cfg);
    const auto frame = Tensor::from({4, 32, 32}, {s.frames.values().begin(), s.frames.values().begin() + 4096});
    for (auto mode : {ResizeMode::bilinear, ResizeMode::pad}) {
        const auto r = resize_frame(frame, 32, 32, mode);
        for (std::size_t i = 0; i < frame.numel(); ++i) ASSERT_EQ(r.values()[i], frame.values()[i]);
        EXPECT_EQ(resize_labels(s.labels, 32, 32, mode).values, s.labels.values);
    }
}

TEST(Resize, ConstantStaysConstant) {
    const auto r = resize_frame(Tensor::full({1, 2, 2}, 0.3), 4, 4, ResizeMode::bilinear);
    for (double v : r.values()) EXPECT_DOUBLE_EQ(v, 0.3);
}

TEST(Resize, CheckerboardMatchesHandStencil) {
    const auto r = resize_frame(Tensor::from({1, 2, 2}, {1, 0, 0, 1}), 4, 4, ResizeMode::bilinear);
    const std::vector<double> want{1,    0.75,  0.25,  0,     0.75, 0.625, 0.375, 0.25,
                                   0.25, 0.375, 0.625, 0.75,  0,    0.25,  0.75,  1};
    for (std::size_t i = 0; i < 16; ++i) EXPECT_DOUBLE_EQ(r.values()[i], want[i]) << "at " << i;
}

TEST(Resize, PadCentresAndNeverCrops) {
    const auto r = resize_frame(Tensor::full({1, 2, 2}, 1.0), 4, 4, ResizeMode::pad);
    const std::vector<double> want{0, 0, 0, 0, 0, 1, 1, 0, 0, 1, 1, 0, 0, 0, 0, 0};
    for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(r.values()[i], want[i]);
    EXPECT_EQ(kind_of([] { resize_frame(Tensor::full({1, 4, 4}, 1.0), 2, 4, ResizeMode::pad); }),
              ErrorKind::config);
}

TEST(Resize, LabelsUseNearestNeighbour) {
    const LabelMap l{2, 2, {0, 1, 2, 3}};
    const auto r = resize_labels(l, 4, 4, ResizeMode::bilinear);
    EXPECT_EQ(r.values, (std::vector<std::int32_t>{0, 0, 1, 1, 0, 0, 1, 1, 2, 2, 3, 3, 2, 2, 3, 3}));
}

TEST(DatasetFile, RoundTripIsBitExactAndHashesAgree) {
    GeneratorConfig cfg;
    cfg.height = cfg.width = 8;
    const auto data = generate_dataset(7, 3, cfg);
    const auto path = temp_path("sephr_dataset_roundtrip.spst");
    save_dataset(path, data);
    const auto back = load_dataset(path);
    ASSERT_EQ(back.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(back.scenes[i].scene_id, data.scenes[i].scene_id);
        EXPECT_EQ(scene_hash(back.scenes[i]), scene_hash(data.scenes[i]));
        EXPECT_EQ(back.scenes[i].labels.values, data.scenes[i].labels.values);
    }
    std::filesystem::remove(path);
}

TEST(DatasetFile, TruncatedFileIsFormatError) {
    GeneratorConfig cfg;
    cfg.height = cfg.width = 8;
    const auto path = temp_path("sephr_dataset_truncated.spst");
    save_dataset(path, generate_dataset(8, 2, cfg));
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 17);
    EXPECT_EQ(kind_of([&] { load_dataset(path); }), ErrorKind::dataset_format);
    std::filesystem::remove(path);
}

TEST(DatasetFile, BadMagicAndVersionAreFormatErrors) {
    const auto path = temp_path("sephr_dataset_bad.spst");
    {
        std::ofstream out(path, std::ios::binary);
        out << "NOPE0000000000000000";
    }
    EXPECT_EQ(kind_of([&] { load_dataset(path); }), ErrorKind::dataset_format);
    {
        std::ofstream out(path, std::ios::binary);
        const char bytes[] = {'S', 'P', 'S', 'T', 9, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0};
        out.write(bytes, sizeof bytes);
    }
    EXPECT_EQ(kind_of([&] { load_dataset(path); }), ErrorKind::dataset_format);
    std::filesystem::remove(path);
    EXPECT_EQ(kind_of([&] { load_dataset(path); }), ErrorKind::io);
}
