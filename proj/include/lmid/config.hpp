// Copyright (C) 2026 Landmark-Id Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lmid/heatmap.hpp"
#include "lmid/losses.hpp"
#include "lmid/model.hpp"
#include "lmid/synthgen.hpp"

namespace lmid {

struct AugmentSwitches {
    bool nla = true;
    bool mla = true;
    bool geometric = true;
    AugmentLimits limits;
};

struct StageEpochs {
    int stage1a = 10;
    int stage1b = 110;
    int stage2a = 10;  // decoder warmup epochs
    int stage2b = 60;
    int baseline = 0;  // 0 selects stage1a + stage1b
};

struct TrainerConfig {
    double base_lr = 3.5e-4;
    double weight_decay = 5e-4;
    int warmup_epochs = 10;
    int batch_p = 16;
    int batch_k = 4;
    int eval_every = 10;
    StageEpochs epochs;
    AugmentSwitches augment;
    double center_update_lr = 0.5;
    bool recon_target_true_coords = true;

    void validate() const;
};

struct EvalConfig {
    int per_id_gallery = 2;
};

// The merged configuration tree. Every field has a default; unknown keys in
// the config file are rejected with their path.
struct RunConfig {
    std::uint64_t seed = 42;
    std::string out = "runs/default";
    SynthConfig synth;
    HeatmapConfig heatmap;   // image_size is taken from the dataset at use site
    MlaConfig mla;
    ModelConfig model;       // k and n_train_classes are filled from the dataset
    LossWeights losses;
    TrainerConfig trainer;
    EvalConfig eval;

    void validate() const;
    std::string digest() const;      // stable over the canonical serialization
    std::string to_json_text() const;
};

RunConfig load_run_config(const std::string& path);
RunConfig parse_run_config(const std::string& json_text);

}  // namespace lmid
