// Copyright (C) 2026 Landmark-Id Authors
// SPDX-License-Identifier: Apache-2.0

#include "lmid/config.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <stdexcept>

#include "lmid/digest.hpp"

using nlohmann::json;

namespace lmid {

void TrainerConfig::validate() const {
    if (base_lr <= 0.0) throw std::invalid_argument("trainer.base_lr must be > 0");
    if (weight_decay < 0.0) throw std::invalid_argument("trainer.weight_decay must be >= 0");
    if (warmup_epochs < 0) throw std::invalid_argument("trainer.warmup_epochs must be >= 0");
    if (batch_p < 2) throw std::invalid_argument("trainer.p must be >= 2");
    if (batch_k < 2) throw std::invalid_argument("trainer.k must be >= 2");
    if (eval_every < 1) throw std::invalid_argument("trainer.eval_every must be >= 1");
    if (epochs.stage1a < 1 || epochs.stage1b < 1 || epochs.stage2a < 1 || epochs.stage2b < 1)
        throw std::invalid_argument("trainer.epochs entries must be >= 1");
    if (epochs.baseline < 0) throw std::invalid_argument("trainer.epochs.baseline must be >= 0");
}

void RunConfig::validate() const {
    synth.validate();
    heatmap.validate();
    mla.validate();
    losses.validate();
    trainer.validate();
    if (eval.per_id_gallery < 0) throw std::invalid_argument("eval.per_id_gallery must be >= 0");
}

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& path) {
    for (const auto& [key, _] : j.items()) {
        if (!allowed.count(key))
            throw std::invalid_argument("unknown config key: " + (path.empty() ? key : path + "." + key));
    }
}

template <typename T>
void take(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
    json j = json::parse(json_text);
    RunConfig cfg;
    reject_unknown(j, {"seed", "out", "synth", "heatmap", "mla", "model", "losses", "trainer", "eval"},
                   "");
    take(j, "seed", cfg.seed);
    take(j, "out", cfg.out);

    if (j.contains("synth")) {
        const json& s = j["synth"];
        reject_unknown(s,
                       {"n_identities", "image_size", "examples_per_split", "ellipse_count_min",
                        "ellipse_count_max", "corner_jitter_frac", "texture_dir", "noise_sigma"},
                       "synth");
        take(s, "n_identities", cfg.synth.n_identities);
        take(s, "image_size", cfg.synth.image_size);
        if (s.contains("examples_per_split")) {
            const json& e = s["examples_per_split"];
            reject_unknown(e, {"train", "gallery", "query"}, "synth.examples_per_split");
            take(e, "train", cfg.synth.examples_per_split.train);
            take(e, "gallery", cfg.synth.examples_per_split.gallery);
            take(e, "query", cfg.synth.examples_per_split.query);
        }
        take(s, "ellipse_count_min", cfg.synth.ellipse_count_min);
        take(s, "ellipse_count_max", cfg.synth.ellipse_count_max);
        take(s, "corner_jitter_frac", cfg.synth.corner_jitter_frac);
        take(s, "texture_dir", cfg.synth.texture_dir);
        take(s, "noise_sigma", cfg.synth.noise_sigma);
    }
    if (j.contains("heatmap")) {
        const json& h = j["heatmap"];
        reject_unknown(h, {"radius_frac", "smoothing_sigma"}, "heatmap");
        take(h, "radius_frac", cfg.heatmap.radius_frac);
        take(h, "smoothing_sigma", cfg.heatmap.smoothing_sigma);
    }
    if (j.contains("mla")) {
        const json& m = j["mla"];
        reject_unknown(m, {"min_visible", "drop_prob"}, "mla");
        take(m, "min_visible", cfg.mla.min_visible);
        take(m, "drop_prob", cfg.mla.drop_prob);
    }
    if (j.contains("model")) {
        const json& m = j["model"];
        reject_unknown(m, {"backbone", "embed_dim", "base_width", "pretrained", "pretrained_weights"},
                       "model");
        if (m.contains("backbone")) cfg.model.backbone = backbone_from_string(m["backbone"]);
        take(m, "embed_dim", cfg.model.embed_dim);
        take(m, "base_width", cfg.model.base_width);
        take(m, "pretrained", cfg.model.pretrained);
        take(m, "pretrained_weights", cfg.model.pretrained_weights);
    }
    if (j.contains("losses")) {
        const json& l = j["losses"];
        reject_unknown(l, {"alpha", "beta", "triplet_margin", "smooth_eps"}, "losses");
        take(l, "alpha", cfg.losses.alpha);
        take(l, "beta", cfg.losses.beta);
        take(l, "triplet_margin", cfg.losses.triplet_margin);
        take(l, "smooth_eps", cfg.losses.smooth_eps);
    }
    if (j.contains("trainer")) {
        const json& t = j["trainer"];
        reject_unknown(t,
                       {"base_lr", "weight_decay", "warmup_epochs", "p", "k", "eval_every", "epochs",
                        "augment", "center_update_lr", "recon_target_true_coords"},
                       "trainer");
        take(t, "base_lr", cfg.trainer.base_lr);
        take(t, "weight_decay", cfg.trainer.weight_decay);
        take(t, "warmup_epochs", cfg.trainer.warmup_epochs);
        take(t, "p", cfg.trainer.batch_p);
        take(t, "k", cfg.trainer.batch_k);
        take(t, "eval_every", cfg.trainer.eval_every);
        if (t.contains("epochs")) {
            const json& e = t["epochs"];
            reject_unknown(e, {"stage1a", "stage1b", "stage2a", "stage2b", "baseline"},
                           "trainer.epochs");
            take(e, "stage1a", cfg.trainer.epochs.stage1a);
            take(e, "stage1b", cfg.trainer.epochs.stage1b);
            take(e, "stage2a", cfg.trainer.epochs.stage2a);
            take(e, "stage2b", cfg.trainer.epochs.stage2b);
            take(e, "baseline", cfg.trainer.epochs.baseline);
        }
        if (t.contains("augment")) {
            const json& a = t["augment"];
            reject_unknown(a,
                           {"nla", "mla", "geometric", "max_rotation_deg", "max_zoom_frac",
                            "max_translate_frac"},
                           "trainer.augment");
            take(a, "nla", cfg.trainer.augment.nla);
            take(a, "mla", cfg.trainer.augment.mla);
            take(a, "geometric", cfg.trainer.augment.geometric);
            take(a, "max_rotation_deg", cfg.trainer.augment.limits.max_rotation_deg);
            take(a, "max_zoom_frac", cfg.trainer.augment.limits.max_zoom_frac);
            take(a, "max_translate_frac", cfg.trainer.augment.limits.max_translate_frac);
        }
        take(t, "center_update_lr", cfg.trainer.center_update_lr);
        take(t, "recon_target_true_coords", cfg.trainer.recon_target_true_coords);
    }
    if (j.contains("eval")) {
        const json& e = j["eval"];
        reject_unknown(e, {"per_id_gallery"}, "eval");
        take(e, "per_id_gallery", cfg.eval.per_id_gallery);
    }
    cfg.synth.master_seed = cfg.seed;
    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_run_config(text);
}

std::string RunConfig::to_json_text() const {
    json j;
    j["seed"] = seed;
    j["out"] = out;
    j["synth"] = {{"n_identities", synth.n_identities},
                  {"image_size", synth.image_size},
                  {"examples_per_split",
                   {{"train", synth.examples_per_split.train},
                    {"gallery", synth.examples_per_split.gallery},
                    {"query", synth.examples_per_split.query}}},
                  {"ellipse_count_min", synth.ellipse_count_min},
                  {"ellipse_count_max", synth.ellipse_count_max},
                  {"corner_jitter_frac", synth.corner_jitter_frac},
                  {"texture_dir", synth.texture_dir},
                  {"noise_sigma", synth.noise_sigma}};
    j["heatmap"] = {{"radius_frac", heatmap.radius_frac}, {"smoothing_sigma", heatmap.smoothing_sigma}};
    j["mla"] = {{"min_visible", mla.min_visible}, {"drop_prob", mla.drop_prob}};
    j["model"] = {{"backbone", to_string(model.backbone)},
                  {"embed_dim", model.embed_dim},
                  {"base_width", model.base_width},
                  {"pretrained", model.pretrained},
                  {"pretrained_weights", model.pretrained_weights}};
    j["losses"] = {{"alpha", losses.alpha},
                   {"beta", losses.beta},
                   {"triplet_margin", losses.triplet_margin},
                   {"smooth_eps", losses.smooth_eps}};
    j["trainer"] = {{"base_lr", trainer.base_lr},
                    {"weight_decay", trainer.weight_decay},
                    {"warmup_epochs", trainer.warmup_epochs},
                    {"p", trainer.batch_p},
                    {"k", trainer.batch_k},
                    {"eval_every", trainer.eval_every},
                    {"epochs",
                     {{"stage1a", trainer.epochs.stage1a},
                      {"stage1b", trainer.epochs.stage1b},
                      {"stage2a", trainer.epochs.stage2a},
                      {"stage2b", trainer.epochs.stage2b},
                      {"baseline", trainer.epochs.baseline}}},
                    {"augment",
                     {{"nla", trainer.augment.nla},
                      {"mla", trainer.augment.mla},
                      {"geometric", trainer.augment.geometric},
                      {"max_rotation_deg", trainer.augment.limits.max_rotation_deg},
                      {"max_zoom_frac", trainer.augment.limits.max_zoom_frac},
                      {"max_translate_frac", trainer.augment.limits.max_translate_frac}}},
                    {"center_update_lr", trainer.center_update_lr},
                    {"recon_target_true_coords", trainer.recon_target_true_coords}};
    j["eval"] = {{"per_id_gallery", eval.per_id_gallery}};
    return j.dump(2);
}

std::string RunConfig::digest() const { return hex64(fnv1a64(to_json_text())); }

}  // namespace lmid
