// Copyright (C) 2026 Landmark-Id Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lmid/config.hpp"
#include "lmid/dataio.hpp"
#include "lmid/evalkit.hpp"
#include "lmid/losses.hpp"
#include "lmid/model.hpp"

namespace lmid {

enum class LossTerm { id, triplet, center, hr };
enum class PipelineMode { baseline, landmark_stage1, landmark_stage2 };

PipelineMode mode_from_string(const std::string& s);
std::string to_string(PipelineMode mode);

struct StagePlan {
    StageTag stage;
    int epochs = 1;
    double lr = 3.5e-4;
    std::set<LossTerm> losses_active;

    void validate() const;  // HR only in stages 2a/2b, epochs >= 1, lr > 0
};

// Default schedule for a mode, honoring the stage-2 fine-tune lr = base/10
// rule. Baseline collapses to one all-trainable stage.
std::vector<StagePlan> plans_for_mode(PipelineMode mode, const TrainerConfig& cfg);

class Trainer {
  public:
    // data_root must contain a synthgen-format dataset. Baseline mode forces
    // k = 0 (heatmap input off, decoder off).
    Trainer(const RunConfig& cfg, const std::string& data_root, const std::string& out_dir,
            PipelineMode mode);

    // Runs the mode's remaining stages; returns the final checkpoint path.
    // When resume_checkpoint is set, model/optimizer/rng state is restored
    // and training continues from the recorded position. landmark_stage2 with
    // a stage-1b-final checkpoint starts at stage 2a.
    std::string run(const std::optional<std::string>& resume_checkpoint = std::nullopt);

    // Single-stage entry, exposed for tests; trains the current model in
    // place and appends to the metrics CSV.
    void run_stage(const StagePlan& plan);

    const Model& model() const { return model_; }
    Model& model() { return model_; }
    const DatasetManifest& manifest() const { return manifest_; }
    std::string metrics_csv() const;
    std::string eval_csv() const;

    void save_checkpoint(const std::string& path, StageTag tag, int stage_index,
                         int epoch_in_stage) const;

  private:
    struct Batch {
        torch::Tensor input;
        torch::Tensor labels;
        torch::Tensor recon_target;  // undefined when HR inactive
        std::vector<int> item_indices;
    };

    Batch assemble_batch(const std::vector<int>& items, bool with_recon_target);
    void evaluate_and_log(int global_epoch);
    double warmup_factor(StageTag stage) const;
    void restore_checkpoint(const std::string& path);

    RunConfig cfg_;
    PipelineMode mode_;
    std::string out_dir_;
    DatasetManifest manifest_;

    struct TrainItem {
        cv::Mat1b image;
        LandmarkSet landmarks;
        int label;
    };
    std::vector<TrainItem> items_;
    std::vector<int> item_labels_;

    Model model_;
    std::unique_ptr<CenterState> centers_;
    std::unique_ptr<PkBatchSampler> sampler_;
    std::unique_ptr<torch::optim::Adam> optimizer_;
    std::optional<StageTag> optimizer_stage_;
    Rng aug_rng_;

    HeatmapConfig input_heatmap_cfg_;   // at dataset resolution
    HeatmapConfig target_heatmap_cfg_;  // at decoder resolution (64)

    int global_step_ = 0;
    int global_epoch_ = 0;
    int stage1_epochs_done_ = 0;  // warmup counter shared by stages 1a/1b
    int resume_stage_index_ = 0;
    int resume_epoch_in_stage_ = 0;
    std::optional<StageTag> current_stage_;
};

// End-to-end pipeline per the mode; writes checkpoints, metrics.csv,
// eval.csv and run provenance under out_dir. Returns the final checkpoint.
std::string run_pipeline(const RunConfig& cfg, PipelineMode mode, const std::string& data_root,
                         const std::string& out_dir,
                         const std::optional<std::string>& resume = std::nullopt);

// Loads a checkpointed model (architecture rebuilt from the stored config).
Model load_checkpoint_model(const std::string& path, StageTag* tag = nullptr);

// Heatmap rendering settings recorded at training time.
HeatmapConfig checkpoint_heatmap_config(const std::string& path);

}  // namespace lmid
