#include "sephrnet/sephrnet.h"

#include <cstring>
#include <filesystem>
#include <memory>
#include <new>
#include <set>
#include <string>

#include "ensemble/adaboost.hpp"
#include "io/label_png.hpp"
#include "run/profiles.hpp"
#include "tensor/parallel.hpp"
#include "train/trainer.hpp"

struct sephr_config {
    sephr::KeyValues kv;
};

struct sephr_dataset {
    sephr::Dataset data;
};

struct sephr_model {
    std::shared_ptr<sephr::SegmentationModel> model;
    bool borrowed = false;
};

struct sephr_ensemble {
    sephr::EnsembleModel ensemble;
    std::vector<std::unique_ptr<sephr_model>> views;
};

struct sephr_metrics {
    sephr::SegmentationMetrics m;
};

namespace {

thread_local std::string g_last_error;

sephr_status status_of(sephr::ErrorKind kind) {
    using sephr::ErrorKind;
    switch (kind) {
        case ErrorKind::config: return SEPHR_ERR_CONFIG;
        case ErrorKind::usage: return SEPHR_ERR_USAGE;
        case ErrorKind::data: return SEPHR_ERR_DATA;
        case ErrorKind::state: return SEPHR_ERR_STATE;
        case ErrorKind::dataset_format: return SEPHR_ERR_DATASET_FORMAT;
        case ErrorKind::checkpoint_format: return SEPHR_ERR_CHECKPOINT_FORMAT;
        case ErrorKind::io: return SEPHR_ERR_IO;
        case ErrorKind::diverged: return SEPHR_ERR_DIVERGED;
        case ErrorKind::unknown_preset: return SEPHR_ERR_UNKNOWN_PRESET;
    }
    return SEPHR_ERR_INTERNAL;
}

sephr_status fail(sephr_status status, std::string message) {
    g_last_error = std::move(message);
    return status;
}

template <class F>
sephr_status guard(F&& body) {
    try {
        g_last_error.clear();
        return body();
    } catch (const sephr::Error& e) {
        return fail(status_of(e.kind()), e.what());
    } catch (const std::bad_alloc&) {
        return fail(SEPHR_ERR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(SEPHR_ERR_INTERNAL, e.what());
    }
}

#define SEPHR_REQUIRE(ptr) \
    if ((ptr) == nullptr) return fail(SEPHR_ERR_NULL_ARGUMENT, "argument '" #ptr "' is null")

sephr_status copy_out(const std::string& text, char* buffer, size_t capacity, size_t* length) {
    if (length) *length = text.size() + 1;
    if (buffer == nullptr || capacity < text.size() + 1)
        return fail(SEPHR_ERR_BUFFER_TOO_SMALL, "buffer holds " + std::to_string(capacity) + " bytes, need " +
                                                    std::to_string(text.size() + 1));
    std::memcpy(buffer, text.c_str(), text.size() + 1);
    return SEPHR_OK;
}

std::string join_path(const char* dir, const char* name) {
    return (std::filesystem::path(dir) / name).string();
}

void check_geometry(const sephr::SegmentationModel& model, const sephr::Dataset& data) {
    SEPHR_CHECK(data.size() > 0, sephr::ErrorKind::data, "dataset is empty");
    const auto& e = model.config().encoder;
    const auto& f = data.scenes[0].frames;
    SEPHR_CHECK(f.dim(1) == e.in_channels && f.dim(2) == e.height && f.dim(3) == e.width, sephr::ErrorKind::config,
                "dataset scenes are ", f.dim(1), " bands of ", f.dim(2), "x", f.dim(3), " but the model expects ",
                e.in_channels, " bands of ", e.height, "x", e.width);
    const auto classes = static_cast<std::int32_t>(model.config().decoder.n_classes);
    for (std::size_t s = 0; s < data.size(); ++s)
        for (auto l : data.scenes[s].labels.values)
            SEPHR_CHECK(l >= 0 && l < classes, sephr::ErrorKind::data, "scene ", s, " has label ", l,
                        " but the model predicts ", classes, " classes");
}

std::vector<std::size_t> checked_indices(const sephr::Dataset& data, const size_t* indices, size_t count) {
    SEPHR_CHECK(count > 0, sephr::ErrorKind::usage, "no scenes selected");
    std::vector<std::size_t> v(indices, indices + count);
    for (auto i : v) SEPHR_CHECK(i < data.size(), sephr::ErrorKind::usage, "scene index ", i, " out of range");
    return v;
}

sephr_status deliver(const sephr::SegmentationMetrics& m, const std::vector<std::int32_t>& pred,
                     sephr_metrics** metrics, int32_t* labels, size_t capacity) {
    if (labels != nullptr) {
        if (capacity < pred.size())
            return fail(SEPHR_ERR_BUFFER_TOO_SMALL, "label buffer holds " + std::to_string(capacity) +
                                                        " values, need " + std::to_string(pred.size()));
        std::memcpy(labels, pred.data(), pred.size() * sizeof(int32_t));
    }
    if (metrics != nullptr) *metrics = new sephr_metrics{m};
    return SEPHR_OK;
}

sephr::KeyValues train_keys(const std::string& metadata) {
    const auto all = sephr::KeyValues::parse(metadata);
    sephr::KeyValues train;
    for (const auto& [k, v] : all.entries())
        if (k.rfind("train.", 0) == 0) train.set(k, v);
    return train;
}

}  // namespace

extern "C" {

const char* sephr_last_error(void) { return g_last_error.c_str(); }

const char* sephr_status_name(sephr_status status) {
    switch (status) {
        case SEPHR_OK: return "ok";
        case SEPHR_ERR_CONFIG: return "config error";
        case SEPHR_ERR_USAGE: return "usage error";
        case SEPHR_ERR_DATA: return "data error";
        case SEPHR_ERR_STATE: return "state error";
        case SEPHR_ERR_DATASET_FORMAT: return "dataset format error";
        case SEPHR_ERR_CHECKPOINT_FORMAT: return "checkpoint format error";
        case SEPHR_ERR_IO: return "i/o error";
        case SEPHR_ERR_DIVERGED: return "training diverged";
        case SEPHR_ERR_UNKNOWN_PRESET: return "unknown preset";
        case SEPHR_ERR_NULL_ARGUMENT: return "null argument";
        case SEPHR_ERR_BUFFER_TOO_SMALL: return "buffer too small";
        case SEPHR_ERR_INTERNAL: return "internal error";
    }
    return "unknown status";
}

const char* sephr_version(void) { return "0.1.0"; }

sephr_status sephr_set_threads(int threads) {
    if (threads < 1) return fail(SEPHR_ERR_USAGE, "thread count must be >= 1");
    return guard([&] {
        sephr::set_num_threads(threads);
        return SEPHR_OK;
    });
}

sephr_status sephr_config_create(sephr_config** out) {
    SEPHR_REQUIRE(out);
    return guard([&] {
        *out = new sephr_config{};
        return SEPHR_OK;
    });
}

sephr_status sephr_config_preset(const char* profile, sephr_config** out) {
    SEPHR_REQUIRE(profile);
    SEPHR_REQUIRE(out);
    return guard([&] {
        *out = new sephr_config{sephr::profile_config(profile)};
        return SEPHR_OK;
    });
}

sephr_status sephr_config_load(const char* path, sephr_config** out) {
    SEPHR_REQUIRE(path);
    SEPHR_REQUIRE(out);
    return guard([&] {
        *out = new sephr_config{sephr::KeyValues::load(path)};
        return SEPHR_OK;
    });
}

sephr_status sephr_config_parse(const char* text, sephr_config** out) {
    SEPHR_REQUIRE(text);
    SEPHR_REQUIRE(out);
    return guard([&] {
        *out = new sephr_config{sephr::KeyValues::parse(text)};
        return SEPHR_OK;
    });
}

sephr_status sephr_config_set(sephr_config* config, const char* key, const char* value) {
    SEPHR_REQUIRE(config);
    SEPHR_REQUIRE(key);
    SEPHR_REQUIRE(value);
    return guard([&] {
        SEPHR_CHECK(*key != '\0', sephr::ErrorKind::config, "empty config key");
        config->kv.set(key, value);
        return SEPHR_OK;
    });
}

sephr_status sephr_config_merge(sephr_config* config, const sephr_config* overrides) {
    SEPHR_REQUIRE(config);
    SEPHR_REQUIRE(overrides);
    return guard([&] {
        config->kv.merge(overrides->kv);
        return SEPHR_OK;
    });
}

sephr_status sephr_config_get(const sephr_config* config, const char* key, char* buffer, size_t capacity,
                              size_t* length) {
    SEPHR_REQUIRE(config);
    SEPHR_REQUIRE(key);
    return guard([&] {
        SEPHR_CHECK(config->kv.has(key), sephr::ErrorKind::config, "config has no key '", key, "'");
        return copy_out(config->kv.str(key, ""), buffer, capacity, length);
    });
}

sephr_status sephr_config_render(const sephr_config* config, char* buffer, size_t capacity, size_t* length) {
    SEPHR_REQUIRE(config);
    return guard([&] { return copy_out(config->kv.render(), buffer, capacity, length); });
}

sephr_status sephr_config_unread(const sephr_config* config, char* buffer, size_t capacity, size_t* length) {
    SEPHR_REQUIRE(config);
    return guard([&] {
        std::string joined;
        for (const auto& k : config->kv.unread()) joined += (joined.empty() ? "" : ",") + k;
        return copy_out(joined, buffer, capacity, length);
    });
}

sephr_status sephr_config_check(const sephr_config* config) {
    SEPHR_REQUIRE(config);
    return guard([&] {
        std::set<std::string> known{"seed"};
        for (const auto& name : sephr::profile_names()) {
            const auto profile = sephr::profile_config(name);
            for (const auto& [k, v] : profile.entries()) known.insert(k);
        }
        for (const auto& [k, v] : config->kv.entries())
            SEPHR_CHECK(known.count(k) > 0, sephr::ErrorKind::config, "unknown config key '", k, "'");
        return SEPHR_OK;
    });
}

sephr_status sephr_config_clone(const sephr_config* config, sephr_config** out) {
    SEPHR_REQUIRE(config);
    SEPHR_REQUIRE(out);
    return guard([&] {
        *out = new sephr_config{sephr::KeyValues::parse(config->kv.render())};
        return SEPHR_OK;
    });
}

void sephr_config_free(sephr_config* config) { delete config; }

sephr_status sephr_dataset_generate(const sephr_config* config, sephr_dataset** out) {
    SEPHR_REQUIRE(config);
    SEPHR_REQUIRE(out);
    return guard([&] {
        const auto& kv = config->kv;
        const auto gen = sephr::GeneratorConfig::from_keyvalues(kv);
        const auto count = kv.size("data.count", 250);
        SEPHR_CHECK(count >= 1, sephr::ErrorKind::config, "data.count must be >= 1");
        const auto seed = static_cast<std::uint64_t>(kv.size("data.seed", 0));
        *out = new sephr_dataset{sephr::generate_dataset(seed, count, gen)};
        return SEPHR_OK;
    });
}

sephr_status sephr_dataset_load(const char* path, sephr_dataset** out) {
    SEPHR_REQUIRE(path);
    SEPHR_REQUIRE(out);
    return guard([&] {
        *out = new sephr_dataset{sephr::load_dataset(path)};
        return SEPHR_OK;
    });
}

sephr_status sephr_dataset_save(const sephr_dataset* dataset, const char* path) {
    SEPHR_REQUIRE(dataset);
    SEPHR_REQUIRE(path);
    return guard([&] {
        sephr::save_dataset(path, dataset->data);
        return SEPHR_OK;
    });
}

sephr_status sephr_dataset_size(const sephr_dataset* dataset, size_t* count) {
    SEPHR_REQUIRE(dataset);
    SEPHR_REQUIRE(count);
    *count = dataset->data.size();
    return SEPHR_OK;
}

sephr_status sephr_dataset_geometry(const sephr_dataset* dataset, size_t* frames, size_t* bands, size_t* height,
                                    size_t* width) {
    SEPHR_REQUIRE(dataset);
    return guard([&] {
        SEPHR_CHECK(dataset->data.size() > 0, sephr::ErrorKind::data, "dataset is empty");
        const auto& f = dataset->data.scenes[0].frames;
        if (frames) *frames = f.dim(0);
        if (bands) *bands = f.dim(1);
        if (height) *height = f.dim(2);
        if (width) *width = f.dim(3);
        return SEPHR_OK;
    });
}

sephr_status sephr_dataset_labels(const sephr_dataset* dataset, size_t scene, int32_t* labels, size_t capacity) {
    SEPHR_REQUIRE(dataset);
    SEPHR_REQUIRE(labels);
    return guard([&] {
        SEPHR_CHECK(scene < dataset->data.size(), sephr::ErrorKind::usage, "scene index ", scene, " out of range");
        const auto& v = dataset->data.scenes[scene].labels.values;
        if (capacity < v.size()) return fail(SEPHR_ERR_BUFFER_TOO_SMALL, "label buffer too small");
        std::memcpy(labels, v.data(), v.size() * sizeof(int32_t));
        return SEPHR_OK;
    });
}

sephr_status sephr_dataset_scene_hash(const sephr_dataset* dataset, size_t scene, uint64_t* hash) {
    SEPHR_REQUIRE(dataset);
    SEPHR_REQUIRE(hash);
    return guard([&] {
        SEPHR_CHECK(scene < dataset->data.size(), sephr::ErrorKind::usage, "scene index ", scene, " out of range");
        *hash = sephr::scene_hash(dataset->data.scenes[scene]);
        return SEPHR_OK;
    });
}

sephr_status sephr_dataset_split(const sephr_dataset* dataset, double train_fraction, uint64_t seed, size_t* train,
                                 size_t* n_train, size_t* holdout, size_t* n_holdout) {
    SEPHR_REQUIRE(dataset);
    SEPHR_REQUIRE(train);
    SEPHR_REQUIRE(n_train);
    SEPHR_REQUIRE(holdout);
    SEPHR_REQUIRE(n_holdout);
    return guard([&] {
        SEPHR_CHECK(train_fraction > 0.0 && train_fraction <= 1.0, sephr::ErrorKind::config,
                    "train fraction must lie in (0, 1], got ", train_fraction);
        const auto s = sephr::split_indices(dataset->data.size(), train_fraction, seed);
        std::copy(s.train.begin(), s.train.end(), train);
        std::copy(s.holdout.begin(), s.holdout.end(), holdout);
        *n_train = s.train.size();
        *n_holdout = s.holdout.size();
        return SEPHR_OK;
    });
}

void sephr_dataset_free(sephr_dataset* dataset) { delete dataset; }

sephr_status sephr_model_create(const sephr_config* config, sephr_model** out) {
    SEPHR_REQUIRE(config);
    SEPHR_REQUIRE(out);
    return guard([&] {
        const auto cfg = sephr::ModelConfig::from_keyvalues(config->kv);
        const auto seed = static_cast<std::uint64_t>(config->kv.size("model.seed", 0));
        *out = new sephr_model{std::make_shared<sephr::SegmentationModel>(cfg, seed)};
        return SEPHR_OK;
    });
}

sephr_status sephr_model_load(const char* path, sephr_model** out) {
    SEPHR_REQUIRE(path);
    SEPHR_REQUIRE(out);
    return guard([&] {
        *out = new sephr_model{std::make_shared<sephr::SegmentationModel>(sephr::SegmentationModel::load(path))};
        return SEPHR_OK;
    });
}

sephr_status sephr_model_save(const sephr_model* model, const char* path) {
    SEPHR_REQUIRE(model);
    SEPHR_REQUIRE(path);
    return guard([&] {
        model->model->save(path);
        return SEPHR_OK;
    });
}

sephr_status sephr_model_config(const sephr_model* model, sephr_config** out) {
    SEPHR_REQUIRE(model);
    SEPHR_REQUIRE(out);
    return guard([&] {
        *out = new sephr_config{model->model->config().to_keyvalues()};
        return SEPHR_OK;
    });
}

sephr_status sephr_model_metadata(const sephr_model* model, sephr_config** out) {
    SEPHR_REQUIRE(model);
    SEPHR_REQUIRE(out);
    return guard([&] {
        *out = new sephr_config{train_keys(model->model->metadata())};
        return SEPHR_OK;
    });
}

sephr_status sephr_separable_saving(const sephr_config* config, size_t* saving) {
    SEPHR_REQUIRE(config);
    SEPHR_REQUIRE(saving);
    return guard([&] {
        const auto cfg = sephr::ModelConfig::from_keyvalues(config->kv).resolved();
        const std::size_t k = cfg.encoder.kernel;
        std::size_t total = 0;
        for (auto c : cfg.encoder.converted_widths()) total += (k * k - 2 * k) * c * c;
        *saving = total;
        return SEPHR_OK;
    });
}

sephr_status sephr_model_param_count(const sephr_model* model, size_t* total, size_t* encoder) {
    SEPHR_REQUIRE(model);
    if (total) *total = model->model->param_count();
    if (encoder) *encoder = model->model->encoder().param_count();
    return SEPHR_OK;
}

sephr_status sephr_model_forward(sephr_model* model, sephr_mode mode, const double* frames, size_t batch,
                                 size_t frames_per_scene, size_t bands, size_t height, size_t width, double* logits,
                                 size_t capacity) {
    SEPHR_REQUIRE(model);
    SEPHR_REQUIRE(frames);
    SEPHR_REQUIRE(logits);
    return guard([&] {
        SEPHR_CHECK(batch >= 1 && frames_per_scene >= 1, sephr::ErrorKind::usage, "empty input");
        const std::size_t per = frames_per_scene * bands * height * width;
        sephr::Dataset data;
        for (std::size_t b = 0; b < batch; ++b) {
            sephr::SceneSequence s;
            s.frames = sephr::Tensor::from({frames_per_scene, bands, height, width},
                                           std::vector<double>(frames + b * per, frames + (b + 1) * per));
            s.labels = sephr::LabelMap{height, width, std::vector<std::int32_t>(height * width, 0)};
            data.scenes.push_back(std::move(s));
        }
        check_geometry(*model->model, data);
        SEPHR_CHECK(mode == SEPHR_MODE_EVAL || mode == SEPHR_MODE_TRAIN, sephr::ErrorKind::usage, "unknown mode");
        const auto idx = sephr::all_indices(batch);
        const auto out = model->model->forward(sephr::batch_frames(*model->model, data, idx),
                                               mode == SEPHR_MODE_TRAIN ? sephr::NormMode::train
                                                                        : sephr::NormMode::eval);
        if (capacity < out.numel())
            return fail(SEPHR_ERR_BUFFER_TOO_SMALL, "logit buffer holds " + std::to_string(capacity) +
                                                        " values, need " + std::to_string(out.numel()));
        std::copy(out.values().begin(), out.values().end(), logits);
        return SEPHR_OK;
    });
}

sephr_status sephr_model_train(sephr_model* model, const sephr_dataset* dataset, const sephr_config* config,
                               const char* out_dir, int verbose) {
    SEPHR_REQUIRE(model);
    SEPHR_REQUIRE(dataset);
    SEPHR_REQUIRE(config);
    return guard([&] {
        check_geometry(*model->model, dataset->data);
        const auto cfg = sephr::TrainConfig::from_keyvalues(config->kv);
        sephr::TrainOutputs out;
        out.quiet = verbose == 0;
        if (out_dir != nullptr && *out_dir != '\0') {
            std::filesystem::create_directories(out_dir);
            out.log_path = join_path(out_dir, "train_log.csv");
            out.holdout_path = join_path(out_dir, "holdout_log.csv");
            out.checkpoint_dir = out_dir;
        }
        sephr::train(*model->model, dataset->data, cfg, out);
        return SEPHR_OK;
    });
}

sephr_status sephr_model_evaluate(sephr_model* model, const sephr_dataset* dataset, const size_t* indices,
                                  size_t count, sephr_metrics** metrics, int32_t* labels, size_t capacity) {
    SEPHR_REQUIRE(model);
    SEPHR_REQUIRE(dataset);
    SEPHR_REQUIRE(indices);
    return guard([&] {
        check_geometry(*model->model, dataset->data);
        const auto idx = checked_indices(dataset->data, indices, count);
        const auto batch = train_keys(model->model->metadata()).size("train.batch_size", 8);
        const auto e = sephr::evaluate(*model->model, dataset->data, idx, std::max<std::size_t>(batch, 1));
        return deliver(e.metrics, e.predictions, metrics, labels, capacity);
    });
}

void sephr_model_free(sephr_model* model) {
    if (model != nullptr && !model->borrowed) delete model;
}

sephr_status sephr_ensemble_train(const sephr_dataset* dataset, const sephr_config* config, const char* out_dir,
                                  int verbose, sephr_ensemble** out) {
    SEPHR_REQUIRE(dataset);
    SEPHR_REQUIRE(config);
    SEPHR_REQUIRE(out);
    return guard([&] {
        const auto& kv = config->kv;
        const auto model_cfg = sephr::ModelConfig::from_keyvalues(kv);
        const auto train_cfg = sephr::TrainConfig::from_keyvalues(kv);
        const auto boost = sephr::AdaBoostConfig::from_keyvalues(kv);
        train_cfg.validate();
        check_geometry(sephr::SegmentationModel(model_cfg, 0), dataset->data);
        const auto split = sephr::split_indices(dataset->data.size(), train_cfg.train_fraction, train_cfg.seed);
        std::string dir;
        if (out_dir != nullptr && *out_dir != '\0') dir = out_dir;
        auto base = sephr::default_base_trainer(dataset->data, model_cfg, train_cfg);
        sephr::BaseTrainer trainer = base;
        if (verbose) {
            trainer = [&](std::span<const std::size_t> items, std::size_t round, std::uint64_t seed) {
                std::fprintf(stderr, "member %zu: training on %zu scenes\n", round, items.size());
                return base(items, round, seed);
            };
        }
        auto ens = sephr::adaboost_train(dataset->data, split.train, boost, trainer, dir);
        ens.metadata = train_cfg.to_keyvalues().render();
        if (!dir.empty()) sephr::save_manifest(join_path(dir.c_str(), "ensemble.manifest"), ens);
        auto handle = std::make_unique<sephr_ensemble>();
        handle->ensemble = std::move(ens);
        *out = handle.release();
        return SEPHR_OK;
    });
}

sephr_status sephr_ensemble_load(const char* manifest, sephr_ensemble** out) {
    SEPHR_REQUIRE(manifest);
    SEPHR_REQUIRE(out);
    return guard([&] {
        auto handle = std::make_unique<sephr_ensemble>();
        handle->ensemble = sephr::load_manifest(manifest);
        *out = handle.release();
        return SEPHR_OK;
    });
}

sephr_status sephr_ensemble_metadata(const sephr_ensemble* ensemble, sephr_config** out) {
    SEPHR_REQUIRE(ensemble);
    SEPHR_REQUIRE(out);
    return guard([&] {
        *out = new sephr_config{train_keys(ensemble->ensemble.metadata)};
        return SEPHR_OK;
    });
}

sephr_status sephr_ensemble_size(const sephr_ensemble* ensemble, size_t* members) {
    SEPHR_REQUIRE(ensemble);
    SEPHR_REQUIRE(members);
    *members = ensemble->ensemble.members.size();
    return SEPHR_OK;
}

sephr_status sephr_ensemble_alpha(const sephr_ensemble* ensemble, size_t member, double* alpha) {
    SEPHR_REQUIRE(ensemble);
    SEPHR_REQUIRE(alpha);
    if (member >= ensemble->ensemble.members.size()) return fail(SEPHR_ERR_USAGE, "member index out of range");
    *alpha = ensemble->ensemble.members[member].alpha;
    return SEPHR_OK;
}

sephr_status sephr_ensemble_member(sephr_ensemble* ensemble, size_t member, sephr_model** model) {
    SEPHR_REQUIRE(ensemble);
    SEPHR_REQUIRE(model);
    if (member >= ensemble->ensemble.members.size()) return fail(SEPHR_ERR_USAGE, "member index out of range");
    return guard([&] {
        auto& views = ensemble->views;
        if (views.size() < ensemble->ensemble.members.size()) views.resize(ensemble->ensemble.members.size());
        if (!views[member])
            views[member].reset(new sephr_model{ensemble->ensemble.members[member].model, true});
        *model = views[member].get();
        return SEPHR_OK;
    });
}

sephr_status sephr_ensemble_evaluate(sephr_ensemble* ensemble, const sephr_dataset* dataset, const size_t* indices,
                                     size_t count, sephr_metrics** metrics, int32_t* labels, size_t capacity) {
    SEPHR_REQUIRE(ensemble);
    SEPHR_REQUIRE(dataset);
    SEPHR_REQUIRE(indices);
    return guard([&] {
        SEPHR_CHECK(!ensemble->ensemble.members.empty(), sephr::ErrorKind::state, "ensemble has no members");
        const auto& first = *ensemble->ensemble.members[0].model;
        check_geometry(first, dataset->data);
        const auto idx = checked_indices(dataset->data, indices, count);
        const auto p = sephr::ensemble_predict(ensemble->ensemble, dataset->data, idx);
        const auto m = sephr::compute_metrics(p.labels, sephr::batch_labels(dataset->data, idx),
                                              first.config().decoder.n_classes);
        return deliver(m, p.labels, metrics, labels, capacity);
    });
}

void sephr_ensemble_free(sephr_ensemble* ensemble) { delete ensemble; }

sephr_status sephr_metrics_value(const sephr_metrics* metrics, sephr_metric which, double* value) {
    SEPHR_REQUIRE(metrics);
    SEPHR_REQUIRE(value);
    const auto& m = metrics->m;
    switch (which) {
        case SEPHR_METRIC_ACCURACY: *value = m.accuracy; return SEPHR_OK;
        case SEPHR_METRIC_PRECISION: *value = m.macro_precision; return SEPHR_OK;
        case SEPHR_METRIC_RECALL: *value = m.macro_recall; return SEPHR_OK;
        case SEPHR_METRIC_F1: *value = m.macro_f1; return SEPHR_OK;
        case SEPHR_METRIC_MIOU: *value = m.miou; return SEPHR_OK;
    }
    return fail(SEPHR_ERR_USAGE, "unknown metric");
}

sephr_status sephr_metrics_class_value(const sephr_metrics* metrics, sephr_metric which, size_t cls,
                                       double* value) {
    SEPHR_REQUIRE(metrics);
    SEPHR_REQUIRE(value);
    const auto& m = metrics->m;
    if (cls >= m.iou.size()) return fail(SEPHR_ERR_USAGE, "class index out of range");
    switch (which) {
        case SEPHR_METRIC_PRECISION: *value = m.precision[cls]; return SEPHR_OK;
        case SEPHR_METRIC_RECALL: *value = m.recall[cls]; return SEPHR_OK;
        case SEPHR_METRIC_F1: *value = m.f1[cls]; return SEPHR_OK;
        case SEPHR_METRIC_MIOU: *value = m.iou[cls]; return SEPHR_OK;
        case SEPHR_METRIC_ACCURACY: break;
    }
    return fail(SEPHR_ERR_USAGE, "metric has no per-class value");
}

sephr_status sephr_metrics_classes(const sephr_metrics* metrics, size_t* classes) {
    SEPHR_REQUIRE(metrics);
    SEPHR_REQUIRE(classes);
    *classes = metrics->m.iou.size();
    return SEPHR_OK;
}

sephr_status sephr_metrics_confusion(const sephr_metrics* metrics, size_t truth, size_t predicted, uint64_t* count) {
    SEPHR_REQUIRE(metrics);
    SEPHR_REQUIRE(count);
    const auto& c = metrics->m.confusion;
    if (truth >= c.size() || predicted >= c.size()) return fail(SEPHR_ERR_USAGE, "class index out of range");
    *count = c[truth][predicted];
    return SEPHR_OK;
}

void sephr_metrics_free(sephr_metrics* metrics) { delete metrics; }

sephr_status sephr_write_label_png(const char* path, const int32_t* labels, size_t height, size_t width,
                                   size_t classes) {
    SEPHR_REQUIRE(path);
    SEPHR_REQUIRE(labels);
    return guard([&] {
        sephr::write_label_png(path, std::span<const std::int32_t>(labels, height * width), height, width, classes);
        return SEPHR_OK;
    });
}

}  // extern "C"
