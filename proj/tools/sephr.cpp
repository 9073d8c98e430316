#include <malloc.h>

#include <charconv>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sephrnet/sephrnet.h"

namespace fs = std::filesystem;

namespace {

struct Failure {
    sephr_status status;
    std::string message;
};

void check(sephr_status s) {
    if (s != SEPHR_OK) throw Failure{s, sephr_last_error()};
}

void usage_error(const std::string& message) { throw Failure{SEPHR_ERR_USAGE, message}; }

template <class T, void (*Free)(T*)>
struct Deleter {
    void operator()(T* p) const { Free(p); }
};
using Config = std::unique_ptr<sephr_config, Deleter<sephr_config, sephr_config_free>>;
using Dataset = std::unique_ptr<sephr_dataset, Deleter<sephr_dataset, sephr_dataset_free>>;
using Model = std::unique_ptr<sephr_model, Deleter<sephr_model, sephr_model_free>>;
using Ensemble = std::unique_ptr<sephr_ensemble, Deleter<sephr_ensemble, sephr_ensemble_free>>;
using Metrics = std::unique_ptr<sephr_metrics, Deleter<sephr_metrics, sephr_metrics_free>>;

template <class F>
std::string read_string(F&& call) {
    size_t length = 0;
    call(nullptr, 0, &length);
    std::string s(length, '\0');
    check(call(s.data(), s.size(), &length));
    s.resize(length - 1);
    return s;
}

std::string get(const sephr_config* c, const std::string& key) {
    return read_string([&](char* b, size_t cap, size_t* len) { return sephr_config_get(c, key.c_str(), b, cap, len); });
}

std::string render(const sephr_config* c) {
    return read_string([&](char* b, size_t cap, size_t* len) { return sephr_config_render(c, b, cap, len); });
}

std::size_t get_size(const sephr_config* c, const std::string& key) { return std::stoull(get(c, key)); }

void set(sephr_config* c, const std::string& key, const std::string& value) {
    check(sephr_config_set(c, key.c_str(), value.c_str()));
}

Config clone(const sephr_config* c) {
    sephr_config* out = nullptr;
    check(sephr_config_clone(c, &out));
    return Config(out);
}

std::string real(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

std::string fixed(double v, int digits = 4) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::trunc | std::ios::binary);
    if (!f) throw Failure{SEPHR_ERR_IO, "cannot write '" + path.string() + "'"};
    f << text;
}

fs::path prepare_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw Failure{SEPHR_ERR_IO, "cannot create output directory '" + dir + "'"};
    return fs::path(dir);
}

struct Row {
    std::vector<std::string> cells;
};

// Aligned text table and CSV from the same rows.
struct Table {
    std::vector<std::string> header;
    std::vector<Row> rows;

    std::string text() const {
        std::vector<std::size_t> width(header.size());
        for (std::size_t i = 0; i < header.size(); ++i) width[i] = header[i].size();
        for (const auto& r : rows)
            for (std::size_t i = 0; i < r.cells.size(); ++i) width[i] = std::max(width[i], r.cells[i].size());
        auto line = [&](const std::vector<std::string>& cells) {
            std::string s;
            for (std::size_t i = 0; i < cells.size(); ++i) {
                s += cells[i] + std::string(width[i] - cells[i].size(), ' ');
                s += i + 1 < cells.size() ? "  " : "";
            }
            while (!s.empty() && s.back() == ' ') s.pop_back();
            return s + "\n";
        };
        std::string out = line(header);
        std::size_t total = 0;
        for (auto w : width) total += w;
        out += std::string(total + 2 * (width.size() - 1), '-') + "\n";
        for (const auto& r : rows) out += line(r.cells);
        return out;
    }

    std::string csv() const {
        auto line = [](const std::vector<std::string>& cells) {
            std::string s;
            for (std::size_t i = 0; i < cells.size(); ++i) s += (i ? "," : "") + cells[i];
            return s + "\n";
        };
        std::string out = line(header);
        for (const auto& r : rows) out += line(r.cells);
        return out;
    }
};

struct Scores {
    double accuracy, precision, recall, f1, miou;
};

Scores scores_of(const sephr_metrics* m) {
    Scores s{};
    check(sephr_metrics_value(m, SEPHR_METRIC_ACCURACY, &s.accuracy));
    check(sephr_metrics_value(m, SEPHR_METRIC_PRECISION, &s.precision));
    check(sephr_metrics_value(m, SEPHR_METRIC_RECALL, &s.recall));
    check(sephr_metrics_value(m, SEPHR_METRIC_F1, &s.f1));
    check(sephr_metrics_value(m, SEPHR_METRIC_MIOU, &s.miou));
    return s;
}

struct Options {
    std::string profile = "desk";
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_given = false;
    int threads = 1;
    std::string out;
    bool verbose = false;
    std::vector<std::pair<std::string, std::string>> overrides;
};

Config build_config(const Options& o) {
    sephr_config* raw = nullptr;
    check(sephr_config_preset(o.profile.c_str(), &raw));
    Config cfg(raw);
    if (!o.config_path.empty()) {
        if (!fs::exists(o.config_path)) throw Failure{SEPHR_ERR_IO, "config file '" + o.config_path + "' not found"};
        sephr_config* file = nullptr;
        check(sephr_config_load(o.config_path.c_str(), &file));
        Config f(file);
        check(sephr_config_merge(cfg.get(), f.get()));
    }
    if (o.seed_given)
        for (const char* key : {"seed", "data.seed", "model.seed", "train.seed", "ensemble.seed"})
            set(cfg.get(), key, std::to_string(o.seed));
    for (const auto& [k, v] : o.overrides) set(cfg.get(), k, v);
    check(sephr_config_check(cfg.get()));
    return cfg;
}

Dataset open_dataset(const std::string& path, const sephr_config* cfg) {
    sephr_dataset* raw = nullptr;
    if (path.empty()) {
        check(sephr_dataset_generate(cfg, &raw));
    } else {
        if (!fs::exists(path)) throw Failure{SEPHR_ERR_IO, "dataset '" + path + "' not found"};
        check(sephr_dataset_load(path.c_str(), &raw));
    }
    return Dataset(raw);
}

std::size_t dataset_size(const sephr_dataset* d) {
    size_t n = 0;
    check(sephr_dataset_size(d, &n));
    return n;
}

struct SplitIndices {
    std::vector<size_t> train, holdout;
};

SplitIndices split_of(const sephr_dataset* d, const sephr_config* train_keys) {
    const std::size_t n = dataset_size(d);
    SplitIndices s;
    s.train.resize(n);
    s.holdout.resize(n);
    size_t nt = 0, nh = 0;
    check(sephr_dataset_split(d, std::stod(get(train_keys, "train.fraction")), get_size(train_keys, "train.seed"),
                              s.train.data(), &nt, s.holdout.data(), &nh));
    s.train.resize(nt);
    s.holdout.resize(nh);
    return s;
}

std::vector<size_t> select(const sephr_dataset* d, const sephr_config* train_keys, const std::string& subset) {
    if (subset == "all") {
        std::vector<size_t> v(dataset_size(d));
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = i;
        return v;
    }
    auto s = split_of(d, train_keys);
    if (subset == "train") return s.train;
    if (subset == "holdout") {
        if (s.holdout.empty()) usage_error("the split holds out no scenes; use --subset train or all");
        return s.holdout;
    }
    usage_error("unknown subset '" + subset + "' (expected all, train or holdout)");
    return {};
}

// The separable variant keeps the configured depth, or converts two layers
// when the config asks for none.
std::string separable_depth(const sephr_config* c) {
    const std::string d = get(c, "encoder.separable_depth");
    return d == "0" ? "2" : d;
}

int cmd_generate(const Options& o) {
    auto cfg = build_config(o);
    auto data = open_dataset({}, cfg.get());
    const auto dir = prepare_dir(o.out);
    check(sephr_dataset_save(data.get(), (dir / "dataset.spst").c_str()));
    write_text(dir / "config.txt", render(cfg.get()));
    std::printf("wrote %zu scenes to %s\n", dataset_size(data.get()), (dir / "dataset.spst").c_str());
    return 0;
}

int cmd_train(const Options& o, const std::string& dataset_path, bool ensemble) {
    auto cfg = build_config(o);
    auto data = open_dataset(dataset_path, cfg.get());
    const auto dir = prepare_dir(o.out);
    write_text(dir / "config.txt", render(cfg.get()));
    if (ensemble) {
        sephr_ensemble* raw = nullptr;
        check(sephr_ensemble_train(data.get(), cfg.get(), dir.c_str(), o.verbose, &raw));
        Ensemble ens(raw);
        size_t members = 0;
        check(sephr_ensemble_size(ens.get(), &members));
        for (size_t m = 0; m < members; ++m) {
            double alpha = 0;
            check(sephr_ensemble_alpha(ens.get(), m, &alpha));
            std::printf("member %zu alpha %s\n", m, real(alpha).c_str());
        }
        std::printf("wrote %s\n", (dir / "ensemble.manifest").c_str());
        return 0;
    }
    sephr_model* raw = nullptr;
    check(sephr_model_create(cfg.get(), &raw));
    Model model(raw);
    check(sephr_model_train(model.get(), data.get(), cfg.get(), dir.c_str(), o.verbose));
    std::printf("wrote %s and %s\n", (dir / "best.ckpt").c_str(), (dir / "final.ckpt").c_str());
    return 0;
}

void write_maps(const fs::path& dir, const sephr_dataset* data, const std::vector<size_t>& idx,
                const std::vector<int32_t>& pred, std::size_t hw, std::size_t h, std::size_t w, std::size_t classes,
                std::size_t count) {
    const auto maps = prepare_dir((dir / "maps").string());
    std::vector<int32_t> truth(hw);
    for (std::size_t i = 0; i < std::min(count, idx.size()); ++i) {
        const std::string stem = "scene" + std::to_string(idx[i]);
        check(sephr_write_label_png((maps / (stem + "_pred.png")).c_str(), pred.data() + i * hw, h, w, classes));
        check(sephr_dataset_labels(data, idx[i], truth.data(), truth.size()));
        check(sephr_write_label_png((maps / (stem + "_truth.png")).c_str(), truth.data(), h, w, classes));
    }
}

int cmd_eval(const Options& o, const std::string& checkpoint, const std::string& dataset_path,
             const std::string& subset, std::size_t maps) {
    if (!fs::exists(checkpoint)) throw Failure{SEPHR_ERR_IO, "checkpoint '" + checkpoint + "' not found"};
    auto cfg = build_config(o);
    auto data = open_dataset(dataset_path, cfg.get());
    const bool is_manifest = fs::path(checkpoint).extension() == ".manifest";

    Model model;
    Ensemble ens;
    sephr_config* meta_raw = nullptr;
    if (is_manifest) {
        sephr_ensemble* raw = nullptr;
        check(sephr_ensemble_load(checkpoint.c_str(), &raw));
        ens.reset(raw);
        check(sephr_ensemble_metadata(ens.get(), &meta_raw));
    } else {
        sephr_model* raw = nullptr;
        check(sephr_model_load(checkpoint.c_str(), &raw));
        model.reset(raw);
        check(sephr_model_metadata(model.get(), &meta_raw));
    }
    Config meta(meta_raw);
    // Checkpoints written outside `train` carry no split; fall back to the config.
    for (const char* key : {"train.fraction", "train.seed"}) {
        size_t len = 0;
        if (sephr_config_get(meta.get(), key, nullptr, 0, &len) == SEPHR_ERR_CONFIG)
            set(meta.get(), key, get(cfg.get(), key));
    }
    const auto idx = select(data.get(), meta.get(), subset);

    size_t frames = 0, bands = 0, h = 0, w = 0;
    check(sephr_dataset_geometry(data.get(), &frames, &bands, &h, &w));
    std::vector<int32_t> pred(idx.size() * h * w);
    sephr_metrics* mraw = nullptr;
    if (is_manifest)
        check(sephr_ensemble_evaluate(ens.get(), data.get(), idx.data(), idx.size(), &mraw, pred.data(), pred.size()));
    else
        check(sephr_model_evaluate(model.get(), data.get(), idx.data(), idx.size(), &mraw, pred.data(), pred.size()));
    Metrics metrics(mraw);
    const Scores s = scores_of(metrics.get());
    size_t classes = 0;
    check(sephr_metrics_classes(metrics.get(), &classes));

    Table summary{{"subset", "scenes", "accuracy", "precision", "recall", "f1", "miou"}, {}};
    summary.rows.push_back({{subset, std::to_string(idx.size()), real(s.accuracy), real(s.precision),
                             real(s.recall), real(s.f1), real(s.miou)}});
    Table per_class{{"class", "precision", "recall", "f1", "iou"}, {}};
    for (size_t c = 0; c < classes; ++c) {
        double p, r, f, iou;
        check(sephr_metrics_class_value(metrics.get(), SEPHR_METRIC_PRECISION, c, &p));
        check(sephr_metrics_class_value(metrics.get(), SEPHR_METRIC_RECALL, c, &r));
        check(sephr_metrics_class_value(metrics.get(), SEPHR_METRIC_F1, c, &f));
        check(sephr_metrics_class_value(metrics.get(), SEPHR_METRIC_MIOU, c, &iou));
        per_class.rows.push_back({{std::to_string(c), fixed(p), fixed(r), fixed(f), fixed(iou)}});
    }
    std::string confusion = "confusion (rows truth, cols prediction)\n";
    for (size_t t = 0; t < classes; ++t) {
        for (size_t p = 0; p < classes; ++p) {
            uint64_t n = 0;
            check(sephr_metrics_confusion(metrics.get(), t, p, &n));
            confusion += (p ? " " : "") + std::to_string(n);
        }
        confusion += "\n";
    }
    const std::string report = summary.text() + "\n" + per_class.text() + "\n" + confusion;
    std::cout << report;
    if (!o.out.empty()) {
        const auto dir = prepare_dir(o.out);
        write_text(dir / "metrics.txt", report);
        write_text(dir / "metrics.csv", summary.csv());
        write_text(dir / "classes.csv", per_class.csv());
        write_maps(dir, data.get(), idx, pred, h * w, h, w, classes, maps);
    }
    return 0;
}

int cmd_ablate(const Options& o, const std::string& dataset_path) {
    auto base = build_config(o);
    auto data = open_dataset(dataset_path, base.get());
    const auto dir = prepare_dir(o.out);
    write_text(dir / "config.txt", render(base.get()));
    const auto idx = split_of(data.get(), base.get()).holdout;
    if (idx.empty()) usage_error("ablation needs held-out scenes; lower train.fraction");
    const std::string depth = separable_depth(base.get());

    Table table{{"model", "conv", "ensemble", "params", "accuracy", "precision", "recall", "f1", "miou"}, {}};
    for (const char* paradigm : {"ed", "eld", "esd"})
        for (const bool separable : {true, false})
            for (const bool boosted : {false, true}) {
                auto cfg = clone(base.get());
                set(cfg.get(), "model.paradigm", paradigm);
                set(cfg.get(), "encoder.separable_depth", separable ? depth : "0");
                const std::string name = std::string(paradigm) + (separable ? "-sep" : "-std") +
                                         (boosted ? "-ens" : "-single");
                const auto run_dir = prepare_dir((dir / name).string());
                if (o.verbose) std::fprintf(stderr, "ablate: %s\n", name.c_str());
                sephr_metrics* mraw = nullptr;
                size_t params = 0, members = 1;
                if (boosted) {
                    sephr_ensemble* raw = nullptr;
                    check(sephr_ensemble_train(data.get(), cfg.get(), run_dir.c_str(), o.verbose, &raw));
                    Ensemble ens(raw);
                    check(sephr_ensemble_size(ens.get(), &members));
                    sephr_model* first = nullptr;
                    check(sephr_ensemble_member(ens.get(), 0, &first));
                    check(sephr_model_param_count(first, &params, nullptr));
                    params *= members;
                    check(sephr_ensemble_evaluate(ens.get(), data.get(), idx.data(), idx.size(), &mraw, nullptr, 0));
                } else {
                    sephr_model* raw = nullptr;
                    check(sephr_model_create(cfg.get(), &raw));
                    Model model(raw);
                    check(sephr_model_train(model.get(), data.get(), cfg.get(), run_dir.c_str(), o.verbose));
                    check(sephr_model_param_count(model.get(), &params, nullptr));
                    check(sephr_model_evaluate(model.get(), data.get(), idx.data(), idx.size(), &mraw, nullptr, 0));
                }
                Metrics metrics(mraw);
                const Scores s = scores_of(metrics.get());
                table.rows.push_back({{paradigm, separable ? "separable" : "standard",
                                       boosted ? "M=" + std::to_string(members) : "single", std::to_string(params),
                                       fixed(s.accuracy), fixed(s.precision), fixed(s.recall), fixed(s.f1),
                                       fixed(s.miou)}});
            }
    std::cout << table.text();
    write_text(dir / "ablation.txt", table.text());
    write_text(dir / "ablation.csv", table.csv());
    return 0;
}

int cmd_bench(const Options& o, std::size_t repeats) {
    auto base = build_config(o);
    const std::size_t batch = get_size(base.get(), "train.batch_size");
    const std::size_t t = get_size(base.get(), "data.frames"), c = get_size(base.get(), "encoder.in_channels"),
                      h = get_size(base.get(), "encoder.height"), w = get_size(base.get(), "encoder.width"),
                      k = get_size(base.get(), "model.classes");
    std::vector<double> frames(batch * t * c * h * w), logits(batch * k * h * w);
    std::mt19937_64 rng(get_size(base.get(), "seed"));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& v : frames) v = normal(rng);
    const std::string depth = separable_depth(base.get());

    Table table{{"model", "conv", "params", "encoder_params", "forward_ms"}, {}};
    std::string audit;
    for (const char* paradigm : {"ed", "eld", "esd"}) {
        size_t encoder[2] = {0, 0}, expected = 0;
        for (const bool separable : {true, false}) {
            auto cfg = clone(base.get());
            set(cfg.get(), "model.paradigm", paradigm);
            set(cfg.get(), "encoder.separable_depth", separable ? depth : "0");
            if (separable) check(sephr_separable_saving(cfg.get(), &expected));
            sephr_model* raw = nullptr;
            check(sephr_model_create(cfg.get(), &raw));
            Model model(raw);
            size_t total = 0;
            check(sephr_model_param_count(model.get(), &total, &encoder[separable ? 0 : 1]));
            check(sephr_model_forward(model.get(), SEPHR_MODE_TRAIN, frames.data(), batch, t, c, h, w, logits.data(),
                                      logits.size()));
            const auto start = std::chrono::steady_clock::now();
            for (std::size_t r = 0; r < repeats; ++r)
                check(sephr_model_forward(model.get(), SEPHR_MODE_EVAL, frames.data(), batch, t, c, h, w,
                                          logits.data(), logits.size()));
            const double ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count() /
                static_cast<double>(repeats);
            table.rows.push_back({{paradigm, separable ? "separable" : "standard", std::to_string(total),
                                   std::to_string(encoder[separable ? 0 : 1]), fixed(ms, 1)}});
        }
        const size_t saving = encoder[1] - encoder[0];
        audit += std::string(paradigm) + ": encoder saving " + std::to_string(saving) + ", closed form " +
                 std::to_string(expected) + (saving == expected ? " (match)\n" : " (mismatch)\n");
    }
    const std::string report = table.text() + "\nforward pass: batch " + std::to_string(batch) + ", " +
                               std::to_string(repeats) + " repeats, eval mode\n" + audit;
    std::cout << report;
    if (!o.out.empty()) {
        const auto dir = prepare_dir(o.out);
        write_text(dir / "bench.txt", report);
        write_text(dir / "bench.csv", table.csv());
    }
    return 0;
}

// `--section.key=value` arguments are config overrides; everything else goes to the parser.
std::vector<std::string> take_overrides(int argc, char** argv, Options& o) {
    std::vector<std::string> rest;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        const auto eq = a.find('=');
        if (a.rfind("--", 0) == 0 && eq != std::string::npos && a.substr(2, eq - 2).find('.') != std::string::npos) {
            o.overrides.emplace_back(a.substr(2, eq - 2), a.substr(eq + 1));
            continue;
        }
        rest.push_back(a);
    }
    return rest;
}

}  // namespace

int main(int argc, char** argv) {
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);

    Options o;
    std::vector<std::string> args = take_overrides(argc, argv, o);
    std::reverse(args.begin(), args.end());

    CLI::App app{"Spatiotemporal crop-map segmentation: data generation, training and evaluation"};
    app.require_subcommand(1);
    app.fallthrough();
    app.add_option("--profile", o.profile, "Base configuration: desk, trend or full")->capture_default_str();
    app.add_option("--config", o.config_path, "Config file of key = value lines, applied over the profile");
    app.add_option("--seed", o.seed, "Seed for data, initialization, shuffling and boosting");
    app.add_option("--threads", o.threads, "Worker threads (1 is bit-reproducible)")->capture_default_str();
    app.add_flag("-v,--verbose", o.verbose, "Progress on stderr");
    app.footer("Any --section.key=value argument overrides that config key.");

    std::string dataset, checkpoint, subset = "holdout";
    bool ensemble = false;
    std::size_t maps = 4, repeats = 3;

    auto* gen = app.add_subcommand("generate", "Write a synthetic dataset");
    gen->add_option("--out", o.out, "Output directory")->required();

    auto* train = app.add_subcommand("train", "Train a model or an AdaBoost ensemble");
    train->add_option("--dataset", dataset, "Dataset file (generated from the config when omitted)");
    train->add_option("--out", o.out, "Output directory")->required();
    train->add_flag("--ensemble", ensemble, "Boost ensemble.members models");

    auto* eval = app.add_subcommand("eval", "Score a checkpoint or ensemble manifest");
    eval->add_option("--checkpoint", checkpoint, "Checkpoint (.ckpt) or ensemble manifest (.manifest)")->required();
    eval->add_option("--dataset", dataset, "Dataset file (generated from the config when omitted)");
    eval->add_option("--subset", subset, "all, train or holdout, using the split stored with the model")
        ->capture_default_str();
    eval->add_option("--maps", maps, "Number of predicted/true map pairs to write")->capture_default_str();
    eval->add_option("--out", o.out, "Report directory");

    auto* ablate = app.add_subcommand("ablate", "Paradigm x convolution x ensemble grid");
    ablate->add_option("--dataset", dataset, "Dataset file (generated from the config when omitted)");
    ablate->add_option("--out", o.out, "Output directory")->required();

    auto* bench = app.add_subcommand("bench", "Parameter counts and forward timings");
    bench->add_option("--repeats", repeats, "Timed forward passes per model")->capture_default_str()->check(
        CLI::PositiveNumber);
    bench->add_option("--out", o.out, "Report directory");

    try {
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : SEPHR_ERR_USAGE;
    }

    o.seed_given = app.count("--seed") > 0;
    try {
        check(sephr_set_threads(o.threads));
        if (*gen) return cmd_generate(o);
        if (*train) return cmd_train(o, dataset, ensemble);
        if (*eval) return cmd_eval(o, checkpoint, dataset, subset, maps);
        if (*ablate) return cmd_ablate(o, dataset);
        if (*bench) return cmd_bench(o, repeats);
    } catch (const Failure& f) {
        std::fprintf(stderr, "sephr: %s: %s\n", sephr_status_name(f.status), f.message.c_str());
        return static_cast<int>(f.status);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "sephr: internal error: %s\n", e.what());
        return SEPHR_ERR_INTERNAL;
    }
    return 0;
}
