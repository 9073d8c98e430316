#include "train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>

#include "model/decoder.hpp"
#include "train/optim.hpp"

namespace sephr {

void TrainConfig::validate() const {
    SEPHR_CHECK(lr >= 0.0 && std::isfinite(lr), ErrorKind::config, "train.lr must be finite and >= 0, got ", lr);
    SEPHR_CHECK(batch_size >= 1, ErrorKind::config, "train.batch_size must be >= 1");
    SEPHR_CHECK(epochs >= 1, ErrorKind::config, "train.epochs must be >= 1");
    SEPHR_CHECK(weight_decay >= 0.0, ErrorKind::config, "train.weight_decay must be >= 0");
    SEPHR_CHECK(train_fraction > 0.0 && train_fraction <= 1.0, ErrorKind::config,
                "train.fraction must lie in (0, 1], got ", train_fraction);
}

KeyValues TrainConfig::to_keyvalues() const {
    KeyValues kv;
    kv.set("train.lr", format_real(lr));
    kv.set("train.batch_size", std::to_string(batch_size));
    kv.set("train.weight_decay", format_real(weight_decay));
    kv.set("train.epochs", std::to_string(epochs));
    kv.set("train.seed", std::to_string(seed));
    kv.set("train.fraction", format_real(train_fraction));
    kv.set("train.augment", augment ? "true" : "false");
    return kv;
}

TrainConfig TrainConfig::from_keyvalues(const KeyValues& kv) {
    TrainConfig c;
    c.lr = kv.real("train.lr", c.lr);
    c.batch_size = kv.size("train.batch_size", c.batch_size);
    c.weight_decay = kv.real("train.weight_decay", c.weight_decay);
    c.epochs = kv.size("train.epochs", c.epochs);
    c.seed = static_cast<std::uint64_t>(kv.size("train.seed", c.seed));
    c.train_fraction = kv.real("train.fraction", c.train_fraction);
    c.augment = kv.flag("train.augment", c.augment);
    return c;
}

std::vector<std::size_t> all_indices(std::size_t n) {
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), std::size_t{0});
    return v;
}

Split split_indices(std::size_t n, double fraction, std::uint64_t seed) {
    SEPHR_CHECK(n >= 1, ErrorKind::data, "cannot split an empty dataset");
    auto order = all_indices(n);
    std::mt19937_64 rng(seed ^ 0x5eed5b1172ull);
    std::shuffle(order.begin(), order.end(), rng);
    const auto k = std::clamp<std::size_t>(static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n))), 1, n);
    Split s;
    s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    s.holdout.assign(order.begin() + static_cast<std::ptrdiff_t>(k), order.end());
    return s;
}

Tensor batch_frames(const SegmentationModel& model, const Dataset& data, std::span<const std::size_t> indices) {
    SEPHR_CHECK(!indices.empty(), ErrorKind::data, "empty batch");
    const auto& first = data.scenes[indices[0]].frames;
    ChannelStats stats{model.norm_mean(), model.norm_std(), 0};
    std::vector<double> v;
    v.reserve(first.numel() * indices.size());
    for (auto i : indices) {
        const auto& f = data.scenes[i].frames;
        SEPHR_CHECK(f.shape() == first.shape(), ErrorKind::data, "scene ", i, " has shape ", shape_str(f.shape()),
                    ", expected ", shape_str(first.shape()));
        const Tensor n = normalize_frames(f, stats);
        v.insert(v.end(), n.values().begin(), n.values().end());
    }
    Shape shape{indices.size()};
    shape.insert(shape.end(), first.shape().begin(), first.shape().end());
    return Tensor::from(std::move(shape), std::move(v));
}

std::vector<std::int32_t> batch_labels(const Dataset& data, std::span<const std::size_t> indices) {
    std::vector<std::int32_t> out;
    for (auto i : indices) out.insert(out.end(), data.scenes[i].labels.values.begin(), data.scenes[i].labels.values.end());
    return out;
}

SceneSequence dihedral(const SceneSequence& scene, unsigned transform) {
    const std::size_t t = scene.frames.dim(0), c = scene.frames.dim(1), h = scene.frames.dim(2),
                      w = scene.frames.dim(3);
    const bool swap = (transform & 4u) != 0;
    SEPHR_CHECK(!swap || h == w, ErrorKind::config, "transpose needs a square scene, got ", h, "x", w);
    auto source = [&](std::size_t y, std::size_t x) {
        if (swap) std::swap(y, x);
        if (transform & 1u) y = h - 1 - y;
        if (transform & 2u) x = w - 1 - x;
        return y * w + x;
    };
    std::vector<double> v(scene.frames.numel());
    const auto src = scene.frames.values();
    for (std::size_t plane = 0; plane < t * c; ++plane)
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) v[plane * h * w + y * w + x] = src[plane * h * w + source(y, x)];
    SceneSequence out{Tensor::from(scene.frames.shape(), std::move(v)), scene.labels, scene.scene_id};
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) out.labels.values[y * w + x] = scene.labels.values[source(y, x)];
    return out;
}

Tensor predict_logits(SegmentationModel& model, const Dataset& data, std::span<const std::size_t> indices,
                      std::size_t batch_size) {
    std::vector<double> v;
    Shape shape;
    for (std::size_t b = 0; b < indices.size(); b += batch_size) {
        const auto chunk = indices.subspan(b, std::min(batch_size, indices.size() - b));
        Tensor logits = model.forward(batch_frames(model, data, chunk), NormMode::eval);
        v.insert(v.end(), logits.values().begin(), logits.values().end());
        shape = logits.shape();
    }
    shape[0] = indices.size();
    return Tensor::from(std::move(shape), std::move(v));
}

Evaluation evaluate(SegmentationModel& model, const Dataset& data, std::span<const std::size_t> indices,
                    std::size_t batch_size) {
    Evaluation e;
    e.predictions = argmax_labels(predict_logits(model, data, indices, batch_size));
    e.metrics = compute_metrics(e.predictions, batch_labels(data, indices), model.config().decoder.n_classes);
    return e;
}

std::string metrics_csv_header() { return "epoch,lr,loss,accuracy,precision,recall,f1,miou"; }

std::string epoch_csv_line(const EpochRecord& r) {
    const auto& m = r.train;
    return std::to_string(r.epoch) + "," + format_real(r.lr) + "," + format_real(r.loss) + "," +
           format_real(m.accuracy) + "," + format_real(m.macro_precision) + "," + format_real(m.macro_recall) + "," +
           format_real(m.macro_f1) + "," + format_real(m.miou);
}

namespace {

std::string holdout_csv_line(std::size_t epoch, const SegmentationMetrics& m) {
    return std::to_string(epoch) + "," + format_real(m.accuracy) + "," + format_real(m.macro_precision) + "," +
           format_real(m.macro_recall) + "," + format_real(m.macro_f1) + "," + format_real(m.miou);
}

std::ofstream open_text(const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    SEPHR_CHECK(f, ErrorKind::io, "cannot write '", path, "'");
    return f;
}

}  // namespace

TrainResult train_on(SegmentationModel& model, const Dataset& data, std::span<const std::size_t> train,
                     std::span<const std::size_t> holdout, const TrainConfig& cfg, const TrainOutputs& out) {
    cfg.validate();
    SEPHR_CHECK(!train.empty(), ErrorKind::data, "training needs at least one scene");
    TrainResult result;
    result.stats = channel_stats(data, train);
    if (result.stats.floored && !out.quiet)
        std::cerr << "warning: " << result.stats.floored << " constant band(s); std floored at " << kStdFloor << "\n";
    model.set_normalization(result.stats.mean, result.stats.stddev);

    std::ofstream log, hold;
    if (!out.log_path.empty()) {
        log = open_text(out.log_path);
        log << metrics_csv_header() << "\n";
    }
    if (!out.holdout_path.empty()) {
        hold = open_text(out.holdout_path);
        hold << "epoch,accuracy,precision,recall,f1,miou\n";
    }
    if (!out.checkpoint_dir.empty()) std::filesystem::create_directories(out.checkpoint_dir);
    const std::string meta = cfg.to_keyvalues().render();

    Adam opt(model.parameters());
    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(train.begin(), train.end());
    double best = -1.0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = cosine_lr(epoch, cfg.epochs, cfg.lr);
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        std::size_t pixels = 0;
        for (std::size_t b = 0, batch = 0; b < order.size(); b += cfg.batch_size, ++batch) {
            auto chunk = std::span<const std::size_t>(order).subspan(b, std::min(cfg.batch_size, order.size() - b));
            Dataset augmented;
            std::vector<std::size_t> local;
            if (cfg.augment) {
                for (auto i : chunk) {
                    augmented.scenes.push_back(dihedral(data.scenes[i], static_cast<unsigned>(rng() % 8)));
                    local.push_back(local.size());
                }
            }
            const Dataset& source = cfg.augment ? augmented : data;
            if (cfg.augment) chunk = local;
            const auto labels = batch_labels(source, chunk);
            Tensor loss = cross_entropy(model.forward(batch_frames(model, source, chunk), NormMode::train), labels);
            const double l = loss.item();
            SEPHR_CHECK(std::isfinite(l), ErrorKind::diverged, "loss became non-finite (", l, ") at epoch ", epoch,
                        ", batch ", batch);
            loss.backward();
            opt.step(lr, cfg.weight_decay);
            model.parameters().zero_grad();
            loss_sum += l * static_cast<double>(labels.size());
            pixels += labels.size();
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr = lr;
        rec.loss = loss_sum / static_cast<double>(pixels);
        rec.train = evaluate(model, data, train, cfg.batch_size).metrics;
        if (!holdout.empty()) rec.holdout = evaluate(model, data, holdout, cfg.batch_size).metrics;
        if (log.is_open()) log << epoch_csv_line(rec) << "\n" << std::flush;
        if (hold.is_open() && rec.holdout) hold << holdout_csv_line(epoch, *rec.holdout) << "\n" << std::flush;
        if (!out.quiet) {
            std::cerr << "epoch " << epoch << " lr " << lr << " loss " << rec.loss << " acc " << rec.train.accuracy
                      << " miou " << rec.train.miou;
            if (rec.holdout) std::cerr << " | holdout acc " << rec.holdout->accuracy << " miou " << rec.holdout->miou;
            std::cerr << "\n";
        }
        const double score = rec.holdout ? rec.holdout->miou : rec.train.miou;
        if (score > best) {
            best = score;
            result.best_epoch = epoch;
            if (!out.checkpoint_dir.empty())
                model.save(out.checkpoint_dir + "/best.ckpt", meta + "train.epoch = " + std::to_string(epoch) + "\n");
        }
        result.epochs.push_back(std::move(rec));
    }
    if (!out.checkpoint_dir.empty())
        model.save(out.checkpoint_dir + "/final.ckpt", meta + "train.epoch = " + std::to_string(cfg.epochs - 1) + "\n");
    return result;
}

TrainResult train(SegmentationModel& model, const Dataset& data, const TrainConfig& cfg, const TrainOutputs& out) {
    cfg.validate();
    const Split s = split_indices(data.size(), cfg.train_fraction, cfg.seed);
    return train_on(model, data, s.train, s.holdout, cfg, out);
}

}  // namespace sephr
