#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <regex>
#include <sstream>

#include "support/oracles.hpp"
#include "train/optim.hpp"
#include "train/trainer.hpp"

using namespace sephr;

namespace {

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

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

// A model whose whole input is one pixel: 1x1 extent, one branch, a 1x1
// transposed conv to the class logits.
ModelConfig pixel_model() {
    ModelConfig c;
    c.encoder.in_channels = 1;
    c.encoder.height = c.encoder.width = 1;
    c.encoder.n_stages = 1;
    c.encoder.branches_per_stage = {1};
    c.encoder.channels_per_branch = {2};
    c.encoder.stem_channels = 2;
    c.encoder.shallow_separable_depth = 0;
    c.encoder.embed_dim = 2;
    c.attention.n_heads = 1;
    c.decoder.seed_channels = 2;
    c.decoder.seed_extent = 1;
    c.decoder.blocks = {{2, 1, 1, 0}};
    c.decoder.n_classes = 2;
    return c;
}

ModelConfig tiny_model() {
    ModelConfig c;
    c.encoder.height = c.encoder.width = 8;
    c.encoder.n_stages = 2;
    c.encoder.branches_per_stage = {1, 2};
    c.encoder.channels_per_branch = {4, 6};
    c.encoder.stem_channels = 4;
    c.encoder.embed_dim = 16;
    c.attention.n_heads = 2;
    c.decoder.seed_channels = 4;
    c.decoder.seed_extent = 2;
    c.decoder.blocks = {{4, 4, 2, 1}, {6, 4, 2, 1}};
    return c;
}

Dataset tiny_data(std::size_t n, std::uint64_t seed) {
    GeneratorConfig g;
    g.height = g.width = 8;
    g.frames = 4;
    return generate_dataset(seed, n, g);
}

}  // namespace

TEST(CrossEntropy, ConfidentTrueClassGivesNearZeroLoss) {
    const auto logits = Tensor::from({3, 1, 2}, {40, -40, 0, 0, -40, 40});
    const std::vector<std::int32_t> labels{0, 2};
    EXPECT_LT(cross_entropy(logits, labels).item(), 1e-15);
}

TEST(CrossEntropy, UniformLogitsGiveLogK) {
    for (std::size_t k : {2u, 5u, 48u}) {
        const auto logits = Tensor::zeros({k, 3, 3});
        const std::vector<std::int32_t> labels(9, 1);
        EXPECT_NEAR(cross_entropy(logits, labels).item(), std::log(static_cast<double>(k)), 1e-12);
    }
}

TEST(CrossEntropy, MatchesPerPixelOracle) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t n = 2, k = 4, hw = 9;
        auto v = oracle::random_values(n * k * hw, rng, -3.0, 3.0);
        std::vector<std::int32_t> labels(n * hw);
        for (auto& l : labels) l = static_cast<std::int32_t>(rng() % k);
        double want = 0.0;
        for (std::size_t s = 0; s < n; ++s)
            for (std::size_t p = 0; p < hw; ++p) {
                double z = 0.0;
                for (std::size_t c = 0; c < k; ++c) z += std::exp(v[(s * k + c) * hw + p]);
                want -= std::log(std::exp(v[(s * k + static_cast<std::size_t>(labels[s * hw + p])) * hw + p]) / z);
            }
        want /= static_cast<double>(n * hw);
        EXPECT_NEAR(cross_entropy(Tensor::from({n, k, 3, 3}, v), labels).item(), want, 1e-9);
    }
}

TEST(CrossEntropy, OutOfRangeLabelNamesPixel) {
    try {
        cross_entropy(Tensor::zeros({2, 2, 2}), std::vector<std::int32_t>{0, 1, 2, 0});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::data);
        EXPECT_NE(std::string(e.what()).find("pixel (1, 0)"), std::string::npos) << e.what();
    }
}

TEST(CrossEntropy, NeverNegative) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        auto v = oracle::random_values(3 * 4, rng, -50.0, 50.0);
        std::vector<std::int32_t> labels{0, 1, 2, 1};
        EXPECT_GE(cross_entropy(Tensor::from({3, 2, 2}, v), labels).item(), 0.0);
    }
}

TEST(Adam, ZeroGradientWithoutDecayLeavesParams) {
    std::vector<double> p{0.3, -1.2}, g{0, 0}, m{0, 0}, v{0, 0};
    for (std::size_t t = 1; t <= 5; ++t) adam_update(p, g, m, v, 0.1, 0.0, t);
    EXPECT_EQ(p, (std::vector<double>{0.3, -1.2}));
}

TEST(Adam, StepNeverExceedsLearningRate) {
    std::vector<double> p{1.0}, g{0.37}, m{0}, v{0};
    const double lr = 0.01;
    for (std::size_t t = 1; t <= 200; ++t) {
        const double before = p[0];
        adam_update(p, g, m, v, lr, 0.0, t);
        EXPECT_LE(std::abs(p[0] - before), lr * (1 + 1e-9)) << "step " << t;
    }
}

TEST(Adam, FirstStepMatchesHandUpdate) {
    std::vector<double> p{0.5, -2.0}, g{0.2, -4.0}, m{0, 0}, v{0, 0};
    const double lr = 0.01, wd = 0.1;
    adam_update(p, g, m, v, lr, wd, 1);
    // After one step m_hat = g and v_hat = g^2, so the update is lr * g / (|g| + eps).
    const double want0 = 0.5 * (1 - lr * wd) - lr * 0.2 / (0.2 + 1e-8);
    const double want1 = -2.0 * (1 - lr * wd) - lr * -4.0 / (4.0 + 1e-8);
    EXPECT_NEAR(p[0], want0, 1e-12);
    EXPECT_NEAR(p[1], want1, 1e-12);
    EXPECT_NEAR(m[0], 0.1 * 0.2, 1e-15);
    EXPECT_NEAR(v[1], 0.001 * 16.0, 1e-15);
}

TEST(Adam, StepCountStartsAtOne) {
    std::vector<double> p{0}, g{0}, m{0}, v{0};
    EXPECT_EQ(kind_of([&] { adam_update(p, g, m, v, 0.1, 0.0, 0); }), ErrorKind::usage);
}

TEST(CosineSchedule, Values) {
    EXPECT_EQ(cosine_lr(0, 30, 1e-3), 1e-3);
    EXPECT_NEAR(cosine_lr(15, 30, 1e-3), 5e-4, 1e-18);
    EXPECT_NEAR(cosine_lr(24, 25, 1e-4), 1e-4 * 0.5 * (1 + std::cos(std::numbers::pi * 24 / 25)), 1e-20);
    EXPECT_NEAR(cosine_lr(24, 25, 1e-4), 3.942649342761062e-07, 1e-18);
    EXPECT_EQ(kind_of([] { cosine_lr(25, 25, 1e-4); }), ErrorKind::usage);
}

TEST(Metrics, PerfectPredictionScoresOne) {
    const std::vector<std::int32_t> t{0, 1, 2, 2, 1, 0, 3, 3};
    const auto m = compute_metrics(t, t, 5);
    EXPECT_EQ(m.accuracy, 1.0);
    EXPECT_EQ(m.miou, 1.0);
    EXPECT_EQ(m.macro_f1, 1.0);
}

TEST(Metrics, ConstantPredictionOnTwoEqualClasses) {
    const std::vector<std::int32_t> truth{0, 0, 1, 1}, pred{0, 0, 0, 0};
    const auto m = compute_metrics(pred, truth, 2);
    EXPECT_EQ(m.accuracy, 0.5);
    EXPECT_EQ(m.iou[0], 0.5);
    EXPECT_EQ(m.iou[1], 0.0);
    EXPECT_EQ(m.miou, 0.25);
}

TEST(Metrics, RandomPairsMatchTallyOracle) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t k = 2 + rng() % 5;
        std::vector<std::int32_t> pred(64), truth(64);
        for (auto& x : pred) x = static_cast<std::int32_t>(rng() % k);
        for (auto& x : truth) x = static_cast<std::int32_t>(rng() % k);
        const auto m = compute_metrics(pred, truth, k);
        const auto cm = oracle::confusion(pred, truth, k);
        EXPECT_EQ(m.confusion, cm);
        std::uint64_t total = 0, diag = 0;
        for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b = 0; b < k; ++b) {
                total += cm[a][b];
                if (a == b) diag += cm[a][b];
            }
        EXPECT_EQ(total, 64u);
        EXPECT_EQ(m.accuracy, static_cast<double>(diag) / 64.0);
        double iou_sum = 0.0, f1_sum = 0.0;
        std::size_t present = 0;
        for (std::size_t c = 0; c < k; ++c) {
            std::uint64_t row = 0, col = 0;
            for (std::size_t j = 0; j < k; ++j) {
                row += cm[c][j];
                col += cm[j][c];
            }
            if (row + col == 0) continue;
            ++present;
            const double tp = static_cast<double>(cm[c][c]);
            const double iou = tp / static_cast<double>(row + col - cm[c][c]);
            const double p = col ? tp / static_cast<double>(col) : 0.0, r = row ? tp / static_cast<double>(row) : 0.0;
            EXPECT_DOUBLE_EQ(m.iou[c], iou);
            iou_sum += iou;
            f1_sum += p + r > 0 ? 2 * p * r / (p + r) : 0.0;
        }
        EXPECT_NEAR(m.miou, iou_sum / static_cast<double>(present), 1e-15);
        EXPECT_NEAR(m.macro_f1, f1_sum / static_cast<double>(present), 1e-15);
        for (double v : {m.accuracy, m.miou, m.macro_f1, m.macro_precision, m.macro_recall}) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
    }
}

TEST(Metrics, MergedMatricesConservePixels) {
    ConfusionMatrix a(3), b(3);
    a.add(std::vector<std::int32_t>{0, 1, 2, 2}, std::vector<std::int32_t>{0, 1, 1, 2});
    b.add(std::vector<std::int32_t>{1, 1}, std::vector<std::int32_t>{0, 1});
    a.merge(b);
    EXPECT_EQ(a.total(), 6u);
    EXPECT_EQ(a.trace(), 4u);
    EXPECT_EQ(kind_of([] { compute_metrics(std::vector<std::int32_t>{3}, std::vector<std::int32_t>{0}, 3); }),
              ErrorKind::data);
}

TEST(Split, SeededPermutationAndSizes) {
    const auto s = split_indices(250, 0.8, 7);
    EXPECT_EQ(s.train.size(), 200u);
    EXPECT_EQ(s.holdout.size(), 50u);
    std::vector<bool> seen(250, false);
    for (auto i : s.train) seen[i] = true;
    for (auto i : s.holdout) seen[i] = true;
    EXPECT_TRUE(std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }));
    EXPECT_EQ(split_indices(250, 0.8, 7).train, s.train);
    EXPECT_NE(split_indices(250, 0.8, 8).train, s.train);
}

TEST(Augment, DihedralActsOnFramesAndLabelsTogether) {
    const auto data = tiny_data(1, 2);
    const auto& s = data.scenes[0];
    for (unsigned t = 0; t < 8; ++t) {
        const auto d = dihedral(s, t);
        for (std::size_t y = 0; y < 8; ++y)
            for (std::size_t x = 0; x < 8; ++x) {
                std::size_t sy = y, sx = x;
                if (t & 4) std::swap(sy, sx);
                if (t & 2) sx = 7 - sx;
                if (t & 1) sy = 7 - sy;
                ASSERT_EQ(d.labels.values[y * 8 + x], s.labels.values[sy * 8 + sx]) << "transform " << t;
            }
    }
    const auto twice = dihedral(dihedral(s, 3), 3);
    EXPECT_EQ(twice.labels.values, s.labels.values);
}

TEST(Train, ZeroLearningRateLeavesWeights) {
    const auto data = tiny_data(4, 3);
    SegmentationModel model(tiny_model(), 1);
    std::vector<std::vector<double>> before;
    for (const auto& [_, t] : model.parameters().params()) before.emplace_back(t.values().begin(), t.values().end());
    TrainConfig cfg;
    cfg.lr = 0.0;
    cfg.weight_decay = 0.0;
    cfg.epochs = 2;
    cfg.batch_size = 2;
    train(model, data, cfg);
    std::size_t i = 0;
    for (const auto& [name, t] : model.parameters().params()) {
        const std::vector<double> now(t.values().begin(), t.values().end());
        EXPECT_EQ(now, before[i++]) << name;
    }
}

TEST(Train, SinglePixelLossNeverRises) {
    Dataset data;
    data.scenes.push_back({Tensor::from({2, 1, 1, 1}, {0.2, 0.9}), LabelMap{1, 1, {0}}, 0});
    SegmentationModel model(pixel_model(), 2);
    TrainConfig cfg;
    cfg.lr = 1e-2;
    cfg.epochs = 25;
    const auto res = train(model, data, cfg);
    ASSERT_EQ(res.epochs.size(), 25u);
    for (std::size_t e = 1; e < res.epochs.size(); ++e)
        EXPECT_LE(res.epochs[e].loss, res.epochs[e - 1].loss + 1e-6) << "epoch " << e;
    EXPECT_LT(res.epochs.back().loss, res.epochs.front().loss);
}

TEST(Train, NonFiniteLossReportsEpochAndBatch) {
    const auto data = tiny_data(3, 4);
    SegmentationModel model(tiny_model(), 1);
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.lr = 1e308;
    cfg.weight_decay = 0.0;
    try {
        train(model, data, cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::diverged);
        EXPECT_TRUE(std::regex_search(e.what(), std::regex("at epoch [0-9]+, batch [0-9]+"))) << e.what();
    }
}

TEST(Train, SameSeedGivesIdenticalLogsAndCheckpoints) {
    const auto data = tiny_data(6, 5);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 2;
    cfg.lr = 1e-3;
    cfg.augment = true;
    std::vector<std::string> logs, ckpts;
    for (int run = 0; run < 2; ++run) {
        const auto dir = std::filesystem::temp_directory_path() / ("sephr_train_det" + std::to_string(run));
        std::filesystem::create_directories(dir);
        TrainOutputs out{(dir / "train_log.csv").string(), (dir / "holdout_log.csv").string(), dir.string()};
        SegmentationModel model(tiny_model(), 9);
        train(model, data, cfg, out);
        logs.push_back(slurp(out.log_path) + slurp(out.holdout_path));
        ckpts.push_back(slurp((dir / "final.ckpt").string()));
        std::filesystem::remove_all(dir);
    }
    EXPECT_FALSE(logs[0].empty());
    EXPECT_EQ(logs[0], logs[1]);
    EXPECT_EQ(ckpts[0], ckpts[1]);
}

TEST(Train, CsvLineCarriesEveryMetric) {
    EXPECT_EQ(metrics_csv_header(), "epoch,lr,loss,accuracy,precision,recall,f1,miou");
    EpochRecord r;
    r.epoch = 3;
    r.lr = 0.5;
    r.loss = 0.25;
    r.train.accuracy = 1;
    r.train.miou = 0.75;
    EXPECT_EQ(epoch_csv_line(r), "3,0.5,0.25,1,0,0,0,0.75");
}

TEST(TrainConfig, RoundTripAndValidation) {
    TrainConfig c;
    c.lr = 3e-4;
    c.epochs = 7;
    c.augment = true;
    const auto back = TrainConfig::from_keyvalues(KeyValues::parse(c.to_keyvalues().render()));
    EXPECT_EQ(back.to_keyvalues().render(), c.to_keyvalues().render());
    TrainConfig bad;
    bad.train_fraction = 0.0;
    EXPECT_EQ(kind_of([&] { bad.validate(); }), ErrorKind::config);
    bad = TrainConfig{};
    bad.lr = -1;
    EXPECT_EQ(kind_of([&] { bad.validate(); }), ErrorKind::config);
}

TEST(KeyValues, ParseRenderAndDiagnostics) {
    auto kv = KeyValues::parse("# comment\nb.x = 3\n\na.y=1,2,3  \nflag = true\nreal = 0.1\n");
    EXPECT_EQ(kv.render(), "a.y = 1,2,3\nb.x = 3\nflag = true\nreal = 0.1\n");
    EXPECT_EQ(kv.sizes("a.y", {}), (std::vector<std::size_t>{1, 2, 3}));
    EXPECT_EQ(kv.size("b.x", 0), 3u);
    EXPECT_TRUE(kv.flag("flag", false));
    EXPECT_EQ(kv.unread(), std::vector<std::string>{"real"});
    EXPECT_EQ(kind_of([&] { kv.size("flag", 0); }), ErrorKind::config);
    EXPECT_EQ(kind_of([] { KeyValues::parse("novalue\n"); }), ErrorKind::config);
    EXPECT_EQ(kind_of([] { KeyValues::load("/nonexistent/sephr.cfg"); }), ErrorKind::io);
    KeyValues over = KeyValues::parse("b.x = 4\n");
    kv.merge(over);
    EXPECT_EQ(kv.size("b.x", 0), 4u);
}

TEST(KeyValues, RealsRoundTripShortest) {
    std::mt19937_64 rng(6);
    for (int i = 0; i < 1000; ++i) {
        const double v = std::ldexp(std::uniform_real_distribution<double>(-1, 1)(rng), static_cast<int>(rng() % 40) - 20);
        EXPECT_EQ(std::stod(format_real(v)), v);
    }
    EXPECT_EQ(format_real(0.1), "0.1");
    EXPECT_EQ(format_real(1e-4), "1e-04");
}
