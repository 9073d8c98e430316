#include "ensemble/adaboost.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "model/decoder.hpp"

namespace sephr {

int sample_error(std::span<const std::int32_t> pred, std::span<const std::int32_t> truth, double theta) {
    SEPHR_CHECK(pred.size() == truth.size() && !pred.empty(), ErrorKind::config, "prediction has ", pred.size(),
                " pixels, truth has ", truth.size());
    SEPHR_CHECK(theta > 0.0 && theta < 1.0, ErrorKind::config, "error threshold must lie in (0, 1), got ", theta);
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) wrong += pred[i] != truth[i];
    // Compare wrong / n > theta without rounding the ratio.
    return static_cast<double>(wrong) > theta * static_cast<double>(pred.size()) ? 1 : -1;
}

ReweightResult adaboost_reweight(std::span<const double> probs, std::span<const int> errors) {
    SEPHR_CHECK(probs.size() == errors.size() && !probs.empty(), ErrorKind::config, "reweighting needs one error per item");
    ReweightResult r;
    double eps = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        SEPHR_CHECK(errors[i] == 1 || errors[i] == -1, ErrorKind::data, "item ", i, " error must be +1 or -1");
        if (errors[i] == 1) eps += probs[i];
    }
    r.degenerate = eps <= kEpsilonClamp || eps >= 1.0 - kEpsilonClamp;
    r.epsilon = std::clamp(eps, kEpsilonClamp, 1.0 - kEpsilonClamp);
    r.alpha = 0.5 * std::log((1.0 - r.epsilon) / r.epsilon);
    double total = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        r.probs.push_back(probs[i] * std::exp(r.alpha * errors[i]));
        total += r.probs.back();
    }
    for (auto& p : r.probs) p /= total;
    return r;
}

std::vector<std::size_t> systematic_sample(std::span<const double> probs, std::size_t count, double start) {
    const std::size_t n = probs.size();
    SEPHR_CHECK(count >= 1 && count <= n, ErrorKind::config, "cannot draw ", count, " distinct items from ", n);
    SEPHR_CHECK(start >= 0.0 && start < 1.0, ErrorKind::usage, "systematic start must lie in [0, 1)");
    std::vector<double> pi(n);
    std::vector<bool> capped(n, false);
    for (;;) {
        double free_mass = 0.0;
        std::size_t fixed = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (capped[i])
                ++fixed;
            else
                free_mass += probs[i];
        }
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            if (capped[i]) {
                pi[i] = 1.0;
                continue;
            }
            pi[i] = free_mass > 0.0 ? static_cast<double>(count - fixed) * probs[i] / free_mass : 0.0;
            if (pi[i] >= 1.0) {
                capped[i] = true;
                changed = true;
            }
        }
        if (!changed) break;
    }
    std::vector<std::size_t> picked;
    std::vector<bool> taken(n, false);
    double cum = 0.0;
    double next = start;
    for (std::size_t i = 0; i < n && picked.size() < count; ++i) {
        cum += pi[i];
        if (next < cum) {
            picked.push_back(i);
            taken[i] = true;
            next += 1.0;
        }
    }
    // Rounding can leave the last point just past the final cumulative sum.
    while (picked.size() < count) {
        std::size_t best = n;
        for (std::size_t i = 0; i < n; ++i)
            if (!taken[i] && (best == n || pi[i] > pi[best])) best = i;
        picked.push_back(best);
        taken[best] = true;
    }
    std::sort(picked.begin(), picked.end());
    return picked;
}

void AdaBoostConfig::validate() const {
    SEPHR_CHECK(members >= 1, ErrorKind::config, "ensemble.members must be >= 1");
    SEPHR_CHECK(theta > 0.0 && theta < 1.0, ErrorKind::config, "ensemble.theta must lie in (0, 1)");
    SEPHR_CHECK(subset_fraction > 0.0 && subset_fraction <= 1.0, ErrorKind::config,
                "ensemble.subset_fraction must lie in (0, 1]");
}

KeyValues AdaBoostConfig::to_keyvalues() const {
    KeyValues kv;
    kv.set("ensemble.members", std::to_string(members));
    kv.set("ensemble.theta", format_real(theta));
    kv.set("ensemble.subset_fraction", format_real(subset_fraction));
    kv.set("ensemble.seed", std::to_string(seed));
    return kv;
}

AdaBoostConfig AdaBoostConfig::from_keyvalues(const KeyValues& kv) {
    AdaBoostConfig c;
    c.members = kv.size("ensemble.members", c.members);
    c.theta = kv.real("ensemble.theta", c.theta);
    c.subset_fraction = kv.real("ensemble.subset_fraction", c.subset_fraction);
    c.seed = static_cast<std::uint64_t>(kv.size("ensemble.seed", c.seed));
    return c;
}

BaseTrainer default_base_trainer(const Dataset& data, const ModelConfig& model_cfg, const TrainConfig& train_cfg) {
    return [&data, model_cfg, train_cfg](std::span<const std::size_t> items, std::size_t, std::uint64_t seed) {
        auto model = std::make_shared<SegmentationModel>(model_cfg, seed);
        TrainConfig tc = train_cfg;
        tc.seed = seed;
        train_on(*model, data, items, {}, tc);
        return model;
    };
}

EnsembleModel adaboost_train(const Dataset& data, std::span<const std::size_t> items, const AdaBoostConfig& cfg,
                             const BaseTrainer& trainer, const std::string& checkpoint_dir) {
    cfg.validate();
    SEPHR_CHECK(!items.empty(), ErrorKind::data, "boosting needs at least one training item");
    const std::size_t n = items.size();
    EnsembleModel ens;
    ens.theta = cfg.theta;
    ens.seed = cfg.seed;
    ens.sample_probs.assign(n, 1.0 / static_cast<double>(n));
    if (!checkpoint_dir.empty()) std::filesystem::create_directories(checkpoint_dir);
    const auto size = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::floor(cfg.subset_fraction * static_cast<double>(n))), 1, n);
    for (std::size_t m = 0; m < cfg.members; ++m) {
        const std::uint64_t seed = derive_seed(cfg.seed, m);
        std::mt19937_64 rng(seed);
        const double start = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        RoundRecord rec;
        rec.subset = systematic_sample(ens.sample_probs, size, start);
        std::vector<std::size_t> chosen;
        for (auto pos : rec.subset) chosen.push_back(items[pos]);
        auto model = trainer(chosen, m, seed);

        const auto pred = evaluate(*model, data, items).predictions;
        const std::size_t hw = pred.size() / n;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& truth = data.scenes[items[i]].labels.values;
            rec.errors.push_back(sample_error(std::span(pred).subspan(i * hw, hw), truth, cfg.theta));
        }
        auto rw = adaboost_reweight(ens.sample_probs, rec.errors);
        ens.sample_probs = std::move(rw.probs);
        rec.epsilon = rw.epsilon;
        rec.alpha = rw.alpha;
        rec.degenerate = rw.degenerate;

        EnsembleMember member{{}, rw.alpha, model};
        if (!checkpoint_dir.empty()) {
            member.checkpoint = "member" + std::to_string(m) + ".ckpt";
            model->save(checkpoint_dir + "/" + member.checkpoint);
        }
        ens.members.push_back(std::move(member));
        ens.rounds.push_back(std::move(rec));
    }
    return ens;
}

std::vector<double> vote_weights(const EnsembleModel& ens) {
    std::vector<double> w;
    bool any = false;
    for (const auto& m : ens.members) {
        w.push_back(std::max(m.alpha, 0.0));
        any = any || w.back() > 0.0;
    }
    if (!any) std::fill(w.begin(), w.end(), 1.0);
    return w;
}

Tensor combine_scores(std::span<const Tensor> member_logits, std::span<const double> weights) {
    SEPHR_CHECK(!member_logits.empty() && member_logits.size() == weights.size(), ErrorKind::config,
                "need one weight per ensemble member");
    const Shape& shape = member_logits[0].shape();
    SEPHR_CHECK(shape.size() == 3 || shape.size() == 4, ErrorKind::config, "member logits must be [N, K, H, W]");
    const std::size_t off = shape.size() - 3;
    const std::size_t n = off ? shape[0] : 1, k = shape[off], hw = shape[off + 1] * shape[off + 2];
    std::vector<double> out(shape_numel(shape), 0.0);
    for (std::size_t m = 0; m < member_logits.size(); ++m) {
        SEPHR_CHECK(member_logits[m].shape() == shape, ErrorKind::config, "member ", m, " logits have shape ",
                    shape_str(member_logits[m].shape()), ", expected ", shape_str(shape));
        const auto v = member_logits[m].values();
        for (std::size_t s = 0; s < n; ++s)
            for (std::size_t p = 0; p < hw; ++p) {
                double mx = v[s * k * hw + p];
                for (std::size_t c = 1; c < k; ++c) mx = std::max(mx, v[(s * k + c) * hw + p]);
                double z = 0.0;
                for (std::size_t c = 0; c < k; ++c) z += std::exp(v[(s * k + c) * hw + p] - mx);
                for (std::size_t c = 0; c < k; ++c)
                    out[(s * k + c) * hw + p] += weights[m] * std::exp(v[(s * k + c) * hw + p] - mx) / z;
            }
    }
    return Tensor::from(shape, std::move(out));
}

EnsemblePrediction ensemble_predict(const EnsembleModel& ens, const Dataset& data,
                                    std::span<const std::size_t> indices, std::size_t batch_size) {
    SEPHR_CHECK(!ens.members.empty(), ErrorKind::state, "ensemble has no members");
    std::vector<Tensor> logits;
    for (const auto& m : ens.members) logits.push_back(predict_logits(*m.model, data, indices, batch_size));
    const auto w = vote_weights(ens);
    EnsemblePrediction p;
    p.scores = combine_scores(logits, w);
    p.labels = argmax_labels(p.scores);
    return p;
}

void save_manifest(const std::string& path, const EnsembleModel& ens) {
    KeyValues kv = KeyValues::parse(ens.metadata);
    kv.set("ensemble.members", std::to_string(ens.members.size()));
    kv.set("ensemble.theta", format_real(ens.theta));
    kv.set("ensemble.seed", std::to_string(ens.seed));
    for (std::size_t m = 0; m < ens.members.size(); ++m) {
        SEPHR_CHECK(!ens.members[m].checkpoint.empty(), ErrorKind::state, "member ", m, " has no checkpoint");
        kv.set("member." + std::to_string(m) + ".checkpoint", ens.members[m].checkpoint);
        kv.set("member." + std::to_string(m) + ".alpha", format_real(ens.members[m].alpha));
        if (m < ens.rounds.size()) {
            kv.set("member." + std::to_string(m) + ".epsilon", format_real(ens.rounds[m].epsilon));
            kv.set("member." + std::to_string(m) + ".degenerate", ens.rounds[m].degenerate ? "true" : "false");
        }
    }
    std::string probs;
    for (std::size_t i = 0; i < ens.sample_probs.size(); ++i) probs += (i ? "," : "") + format_real(ens.sample_probs[i]);
    kv.set("ensemble.sample_probs", probs);
    std::ofstream out(path, std::ios::trunc);
    SEPHR_CHECK(out, ErrorKind::io, "cannot write manifest '", path, "'");
    out << kv.render();
}

EnsembleModel load_manifest(const std::string& path) {
    const KeyValues kv = KeyValues::load(path);
    EnsembleModel ens;
    ens.metadata = kv.render();
    ens.theta = kv.real("ensemble.theta", 0.2);
    ens.seed = static_cast<std::uint64_t>(kv.size("ensemble.seed", 0));
    const std::size_t count = kv.size("ensemble.members", 0);
    SEPHR_CHECK(count >= 1, ErrorKind::checkpoint_format, "manifest '", path, "' lists no members");
    const auto dir = std::filesystem::path(path).parent_path();
    for (std::size_t m = 0; m < count; ++m) {
        const std::string key = "member." + std::to_string(m);
        SEPHR_CHECK(kv.has(key + ".checkpoint"), ErrorKind::checkpoint_format, "manifest is missing ", key,
                    ".checkpoint");
        EnsembleMember member;
        member.checkpoint = kv.str(key + ".checkpoint", "");
        member.alpha = kv.real(key + ".alpha", 1.0);
        std::filesystem::path p(member.checkpoint);
        if (p.is_relative()) p = dir / p;
        member.model = std::make_shared<SegmentationModel>(SegmentationModel::load(p.string()));
        ens.members.push_back(std::move(member));
    }
    const std::string probs = kv.str("ensemble.sample_probs", "");
    std::size_t pos = 0;
    while (pos < probs.size()) {
        auto end = probs.find(',', pos);
        if (end == std::string::npos) end = probs.size();
        ens.sample_probs.push_back(std::stod(probs.substr(pos, end - pos)));
        pos = end + 1;
    }
    return ens;
}

}  // namespace sephr
