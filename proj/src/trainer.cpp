// Copyright (C) 2026 Landmark-Id Authors
// SPDX-License-Identifier: Apache-2.0

#include "lmid/trainer.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "lmid/provenance.hpp"
#include "lmid/tensorize.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace lmid {

PipelineMode mode_from_string(const std::string& s) {
    if (s == "baseline") return PipelineMode::baseline;
    if (s == "landmark-stage1") return PipelineMode::landmark_stage1;
    if (s == "landmark-stage2") return PipelineMode::landmark_stage2;
    throw std::invalid_argument("unknown mode: " + s);
}

std::string to_string(PipelineMode mode) {
    switch (mode) {
        case PipelineMode::baseline: return "baseline";
        case PipelineMode::landmark_stage1: return "landmark-stage1";
        case PipelineMode::landmark_stage2: return "landmark-stage2";
    }
    throw std::logic_error("bad mode");
}

void StagePlan::validate() const {
    if (epochs < 1) throw std::invalid_argument("StagePlan: epochs must be >= 1");
    if (lr <= 0.0) throw std::invalid_argument("StagePlan: lr must be > 0");
    const bool hr = losses_active.count(LossTerm::hr) > 0;
    if (hr && stage != StageTag::s2a && stage != StageTag::s2b)
        throw std::invalid_argument("StagePlan: HR loss is only active in stages 2a/2b");
}

std::vector<StagePlan> plans_for_mode(PipelineMode mode, const TrainerConfig& cfg) {
    const std::set<LossTerm> reid = {LossTerm::id, LossTerm::triplet, LossTerm::center};
    const std::set<LossTerm> all = {LossTerm::id, LossTerm::triplet, LossTerm::center, LossTerm::hr};
    const StagePlan s1a{StageTag::s1a, cfg.epochs.stage1a, cfg.base_lr, reid};
    const StagePlan s1b{StageTag::s1b, cfg.epochs.stage1b, cfg.base_lr, reid};
    const StagePlan s2a{StageTag::s2a, cfg.epochs.stage2a, cfg.base_lr, {LossTerm::hr}};
    // fine-tune runs at one tenth of the first-stage learning rate
    const StagePlan s2b{StageTag::s2b, cfg.epochs.stage2b, cfg.base_lr / 10.0, all};
    switch (mode) {
        case PipelineMode::baseline: {
            const int epochs =
                cfg.epochs.baseline > 0 ? cfg.epochs.baseline : cfg.epochs.stage1a + cfg.epochs.stage1b;
            return {StagePlan{StageTag::s1b, epochs, cfg.base_lr, reid}};
        }
        case PipelineMode::landmark_stage1: return {s1a, s1b};
        case PipelineMode::landmark_stage2: return {s1a, s1b, s2a, s2b};
    }
    throw std::logic_error("bad mode");
}

namespace {

std::string csv_num(double v) {
    std::ostringstream ss;
    ss << std::setprecision(10) << v;
    return ss.str();
}

LandmarkSet scale_coords(const LandmarkSet& lms, double factor) {
    LandmarkSet out = lms;
    for (Point2& p : out.coords) {
        p.x *= factor;
        p.y *= factor;
    }
    return out;
}

}  // namespace

Trainer::Trainer(const RunConfig& cfg, const std::string& data_root, const std::string& out_dir,
                 PipelineMode mode)
    : cfg_(cfg), mode_(mode), out_dir_(out_dir), aug_rng_(derive_seed(cfg.seed, 0xa06ULL)) {
    cfg_.validate();
    fs::create_directories(out_dir_);
    manifest_ = load_annotations(data_root);

    const auto train_indices = manifest_.indices_of(Split::train);
    if (train_indices.empty()) throw std::runtime_error("Trainer: dataset has no train split");
    items_.reserve(train_indices.size());
    for (int idx : train_indices) {
        const Sample& s = manifest_.samples[idx];
        items_.push_back({load_gray_image(manifest_.root, s.image_path), s.landmarks,
                          s.identity_label});
        item_labels_.push_back(s.identity_label);
    }
    const int n_classes = static_cast<int>(manifest_.identity_set(Split::train).size());

    input_heatmap_cfg_ = cfg_.heatmap;
    input_heatmap_cfg_.image_size = items_.front().image.rows;
    target_heatmap_cfg_ = cfg_.heatmap;
    target_heatmap_cfg_.image_size = 64;

    ModelConfig model_cfg = cfg_.model;
    model_cfg.k = mode_ == PipelineMode::baseline ? 0 : manifest_.k;
    model_cfg.n_train_classes = n_classes;
    torch::manual_seed(derive_seed(cfg_.seed, 0x30de1ULL));
    model_ = init_parameters(model_cfg);

    centers_ = std::make_unique<CenterState>(n_classes, model_cfg.embed_dim,
                                             cfg_.trainer.center_update_lr);
    sampler_ = std::make_unique<PkBatchSampler>(item_labels_, cfg_.trainer.batch_p,
                                                cfg_.trainer.batch_k,
                                                derive_seed(cfg_.seed, 0x5a3bULL));
}

std::string Trainer::metrics_csv() const { return (fs::path(out_dir_) / "metrics.csv").string(); }
std::string Trainer::eval_csv() const { return (fs::path(out_dir_) / "eval.csv").string(); }

double Trainer::warmup_factor(StageTag stage) const {
    if (stage != StageTag::s1a && stage != StageTag::s1b) return 1.0;
    if (cfg_.trainer.warmup_epochs <= 0) return 1.0;
    return std::min(1.0, (stage1_epochs_done_ + 1.0) / cfg_.trainer.warmup_epochs);
}

Trainer::Batch Trainer::assemble_batch(const std::vector<int>& item_indices, bool with_recon_target) {
    const int k = model_->config().k;
    const ImageNorm norm = norm_for(model_->config());
    const double target_scale = 64.0 / input_heatmap_cfg_.image_size;

    std::vector<torch::Tensor> inputs, targets;
    std::vector<int64_t> labels;
    for (int idx : item_indices) {
        cv::Mat1b image = items_[idx].image;
        LandmarkSet lms = items_[idx].landmarks;
        if (cfg_.trainer.augment.geometric) {
            auto aug = joint_augment(image, lms, aug_rng_, cfg_.trainer.augment.limits);
            image = std::move(aug.image);
            lms = std::move(aug.landmarks);
        }
        if (k > 0) {
            const LandmarkSet after_mla =
                cfg_.trainer.augment.mla ? apply_mla(lms, cfg_.mla, aug_rng_) : lms;
            const LandmarkSet input_lms =
                cfg_.trainer.augment.nla ? apply_nla(after_mla, input_heatmap_cfg_, aug_rng_)
                                         : after_mla;
            inputs.push_back(sample_to_tensor(image, input_lms, k, input_heatmap_cfg_, norm));
            if (with_recon_target) {
                const LandmarkSet& target_lms =
                    cfg_.trainer.recon_target_true_coords ? after_mla : input_lms;
                targets.push_back(stack_to_tensor(
                    render_stack(scale_coords(target_lms, target_scale), target_heatmap_cfg_)));
            }
        } else {
            inputs.push_back(image_to_tensor(image, norm));
        }
        labels.push_back(items_[idx].label);
    }

    Batch batch;
    batch.input = torch::stack(inputs);
    batch.labels = torch::tensor(labels, torch::kInt64);
    if (!targets.empty()) batch.recon_target = torch::stack(targets);
    batch.item_indices = item_indices;
    return batch;
}

void Trainer::run_stage(const StagePlan& plan) {
    plan.validate();
    if ((plan.stage == StageTag::s2a || plan.stage == StageTag::s2b) && !model_->has_decoder())
        throw std::runtime_error("run_stage: stage " + to_string(plan.stage) +
                                 " requires the decoder to be attached");
    if (plan.stage == StageTag::s1a || plan.stage == StageTag::s1b) {
        if (model_->has_decoder())
            throw std::runtime_error("run_stage: stage " + to_string(plan.stage) +
                                     " must run before the decoder is attached");
    }

    const ParameterGroups groups = parameter_groups(*model_, plan.stage);
    apply_parameter_groups(*model_, groups);
    const std::uint64_t frozen_before = parameters_digest(*model_, groups.frozen);

    // a restored mid-stage optimizer is kept; anything else gets a fresh one
    if (!optimizer_ || optimizer_stage_ != plan.stage) {
        std::vector<torch::Tensor> trainable;
        const std::set<std::string> names(groups.trainable.begin(), groups.trainable.end());
        for (auto& p : model_->named_parameters())
            if (names.count(p.key())) trainable.push_back(p.value());
        optimizer_ = std::make_unique<torch::optim::Adam>(
            trainable,
            torch::optim::AdamOptions(plan.lr).weight_decay(cfg_.trainer.weight_decay));
        optimizer_stage_ = plan.stage;
    }

    const bool metrics_new = !fs::exists(metrics_csv());
    std::ofstream metrics(metrics_csv(), std::ios::app);
    if (!metrics) throw std::runtime_error("cannot write " + metrics_csv());
    if (metrics_new) metrics << "step,loss_total,loss_id,loss_triplet,loss_center,loss_hr\n";

    {
        std::ofstream log(fs::path(out_dir_) / "stage-transitions.log", std::ios::app);
        log << "stage " << to_string(plan.stage) << " start epochs=" << plan.epochs
            << " lr=" << plan.lr << "\n";
    }
    std::cout << "[train] stage " << to_string(plan.stage) << ": " << plan.epochs
              << " epochs at lr " << plan.lr << "\n";

    const bool use_hr = plan.losses_active.count(LossTerm::hr) > 0;
    const int start_epoch = resume_epoch_in_stage_;
    resume_epoch_in_stage_ = 0;

    for (int epoch = start_epoch; epoch < plan.epochs; ++epoch) {
        const double lr = plan.lr * warmup_factor(plan.stage);
        for (auto& group : optimizer_->param_groups())
            static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);

        for (const std::vector<int>& batch_indices : sampler_->next_epoch()) {
            Batch batch = assemble_batch(batch_indices, use_hr);
            optimizer_->zero_grad();
            const ModelOutput out = model_->forward(batch.input);

            LossParts parts;
            if (plan.losses_active.count(LossTerm::id))
                parts.id = id_loss(out.logits, batch.labels, cfg_.losses.smooth_eps);
            if (plan.losses_active.count(LossTerm::triplet))
                parts.triplet = triplet_loss(out.embedding, batch.labels, cfg_.losses.triplet_margin);
            if (plan.losses_active.count(LossTerm::center))
                parts.center = centers_->loss(out.embedding, batch.labels);
            if (use_hr) parts.hr = recon_loss(out.recon, batch.recon_target);

            torch::Tensor total;
            try {
                total = total_loss(parts, cfg_.losses);
            } catch (const std::exception& e) {
                json repro;
                repro["stage"] = to_string(plan.stage);
                repro["global_step"] = global_step_;
                repro["epoch"] = epoch;
                repro["batch_items"] = batch.item_indices;
                repro["error"] = e.what();
                const auto path = fs::path(out_dir_) / "nan_batch.json";
                std::ofstream(path) << repro.dump(2) << "\n";
                throw std::runtime_error(std::string(e.what()) + "; offending batch persisted to " +
                                         path.string());
            }

            total.backward();
            optimizer_->step();
            if (parts.center) centers_->update(out.embedding.detach(), batch.labels);

            metrics << global_step_ << ',' << csv_num(total.item<double>()) << ','
                    << (parts.id ? csv_num(parts.id->item<double>()) : "") << ','
                    << (parts.triplet ? csv_num(parts.triplet->item<double>()) : "") << ','
                    << (parts.center ? csv_num(parts.center->item<double>()) : "") << ','
                    << (parts.hr ? csv_num(parts.hr->item<double>()) : "") << '\n';
            ++global_step_;
        }

        if (plan.stage == StageTag::s1a || plan.stage == StageTag::s1b) ++stage1_epochs_done_;
        ++global_epoch_;
        if (global_epoch_ % cfg_.trainer.eval_every == 0) evaluate_and_log(global_epoch_);
    }
    metrics.flush();

    const std::uint64_t frozen_after = parameters_digest(*model_, groups.frozen);
    if (frozen_before != frozen_after)
        throw std::logic_error("run_stage: frozen parameters changed during stage " +
                               to_string(plan.stage));
}

void Trainer::evaluate_and_log(int global_epoch) {
    const RetrievalReport report = evaluate_retrieval(model_, manifest_, input_heatmap_cfg_);
    const bool fresh = !fs::exists(eval_csv());
    std::ofstream out(eval_csv(), std::ios::app);
    if (fresh) out << "epoch,top1,top5,top10\n";
    out << global_epoch << ',' << csv_num(report.top1) << ',' << csv_num(report.top5) << ','
        << csv_num(report.top10) << '\n';
    std::cout << "[eval] epoch " << global_epoch << " top1=" << report.top1
              << " top5=" << report.top5 << " top10=" << report.top10 << "\n";
    // evaluation flipped the module modes; restore the stage's freeze state
    if (current_stage_) apply_parameter_groups(*model_, parameter_groups(*model_, *current_stage_));
}

std::string Trainer::run(const std::optional<std::string>& resume_checkpoint) {
    const std::vector<StagePlan> plans = plans_for_mode(mode_, cfg_.trainer);
    int start_stage = 0;
    if (resume_checkpoint) {
        restore_checkpoint(*resume_checkpoint);
        start_stage = resume_stage_index_;
    }

    std::string last_checkpoint;
    for (size_t si = start_stage; si < plans.size(); ++si) {
        const StagePlan& plan = plans[si];
        if ((plan.stage == StageTag::s2a || plan.stage == StageTag::s2b) && !model_->has_decoder()) {
            torch::manual_seed(derive_seed(cfg_.seed, 0xdec0deULL));
            model_->attach_decoder();
        }
        current_stage_ = plan.stage;
        run_stage(plan);
        last_checkpoint = (fs::path(out_dir_) / ("stage-" + to_string(plan.stage) + "-final.pt")).string();
        save_checkpoint(last_checkpoint, plan.stage, static_cast<int>(si), plan.epochs);
    }
    if (global_epoch_ % cfg_.trainer.eval_every != 0) evaluate_and_log(global_epoch_);
    return last_checkpoint;
}

void Trainer::save_checkpoint(const std::string& path, StageTag tag, int stage_index,
                              int epoch_in_stage) const {
    torch::serialize::OutputArchive archive;
    json meta;
    meta["model_config"] = json::parse(model_->config().to_json());
    meta["stage"] = to_string(tag);
    meta["stage_index"] = stage_index;
    meta["epoch_in_stage"] = epoch_in_stage;
    meta["stage_complete"] = epoch_in_stage >= plans_for_mode(mode_, cfg_.trainer)[stage_index].epochs;
    meta["global_step"] = global_step_;
    meta["global_epoch"] = global_epoch_;
    meta["stage1_epochs_done"] = stage1_epochs_done_;
    meta["mode"] = to_string(mode_);
    meta["has_decoder"] = model_->has_decoder();
    meta["heatmap"] = {{"radius_frac", cfg_.heatmap.radius_frac},
                       {"smoothing_sigma", cfg_.heatmap.smoothing_sigma}};
    meta["version"] = kVersion;
    archive.write("meta", c10::IValue(meta.dump()));

    for (const auto& p : model_->named_parameters())
        archive.write("param/" + p.key(), p.value().detach());
    for (const auto& b : model_->named_buffers())
        archive.write("buffer/" + b.key(), b.value().detach());
    archive.write("centers", centers_->centers());

    if (optimizer_) {
        torch::serialize::OutputArchive optim_archive;
        optimizer_->save(optim_archive);
        archive.write("optim", optim_archive);
    }
    std::ostringstream aug_state, sampler_state;
    aug_state << aug_rng_;
    sampler_->save_state(sampler_state);
    archive.write("aug_rng", c10::IValue(aug_state.str()));
    archive.write("sampler_rng", c10::IValue(sampler_state.str()));
    archive.save_to(path);
}

void Trainer::restore_checkpoint(const std::string& path) {
    if (!fs::exists(path)) throw std::runtime_error("checkpoint not found: " + path);
    torch::serialize::InputArchive archive;
    archive.load_from(path);
    c10::IValue meta_iv;
    archive.read("meta", meta_iv);
    const json meta = json::parse(meta_iv.toStringRef());

    const ModelConfig stored = ModelConfig::from_json(meta["model_config"].dump());
    const StageTag tag = stage_from_string(meta["stage"].get<std::string>());
    const bool complete = meta["stage_complete"].get<bool>();

    if (mode_ == PipelineMode::landmark_stage2) {
        const bool stage1_final = tag == StageTag::s1b && complete;
        const bool stage2_ckpt = tag == StageTag::s2a || tag == StageTag::s2b;
        if (!stage1_final && !stage2_ckpt)
            throw std::runtime_error(
                "landmark-stage2 requires a completed stage-1 checkpoint (stage-1b-final); got stage " +
                to_string(tag));
    }
    if (stored.k != model_->config().k)
        throw std::runtime_error("checkpoint k=" + std::to_string(stored.k) +
                                 " does not match dataset/mode k=" +
                                 std::to_string(model_->config().k));

    if (meta["has_decoder"].get<bool>() && !model_->has_decoder()) {
        torch::manual_seed(derive_seed(cfg_.seed, 0xdec0deULL));
        model_->attach_decoder();
    }
    {
        torch::NoGradGuard no_grad;
        for (const auto& p : model_->named_parameters()) {
            torch::Tensor t;
            archive.read("param/" + p.key(), t);
            p.value().copy_(t);
        }
        for (const auto& b : model_->named_buffers()) {
            torch::Tensor t;
            archive.read("buffer/" + b.key(), t);
            b.value().copy_(t);
        }
        torch::Tensor centers;
        archive.read("centers", centers);
        centers_->centers().copy_(centers);
    }

    global_step_ = meta["global_step"].get<int>();
    global_epoch_ = meta["global_epoch"].get<int>();
    stage1_epochs_done_ = meta["stage1_epochs_done"].get<int>();

    c10::IValue aug_iv, sampler_iv;
    archive.read("aug_rng", aug_iv);
    archive.read("sampler_rng", sampler_iv);
    std::istringstream aug_state(aug_iv.toStringRef());
    aug_state >> aug_rng_;
    std::istringstream sampler_state(sampler_iv.toStringRef());
    sampler_->load_state(sampler_state);

    const std::vector<StagePlan> plans = plans_for_mode(mode_, cfg_.trainer);
    int stage_index = -1;
    for (size_t i = 0; i < plans.size(); ++i)
        if (plans[i].stage == tag) stage_index = static_cast<int>(i);
    if (stage_index < 0)
        throw std::runtime_error("checkpoint stage " + to_string(tag) + " not part of mode " +
                                 to_string(mode_));

    if (complete) {
        resume_stage_index_ = stage_index + 1;
        resume_epoch_in_stage_ = 0;
    } else {
        resume_stage_index_ = stage_index;
        resume_epoch_in_stage_ = meta["epoch_in_stage"].get<int>();
        // rebuild the optimizer over the stage's trainable set, then restore
        const ParameterGroups groups = parameter_groups(*model_, tag);
        apply_parameter_groups(*model_, groups);
        std::vector<torch::Tensor> trainable;
        const std::set<std::string> names(groups.trainable.begin(), groups.trainable.end());
        for (auto& p : model_->named_parameters())
            if (names.count(p.key())) trainable.push_back(p.value());
        optimizer_ = std::make_unique<torch::optim::Adam>(
            trainable, torch::optim::AdamOptions(plans[stage_index].lr)
                           .weight_decay(cfg_.trainer.weight_decay));
        optimizer_stage_ = tag;
        torch::serialize::InputArchive optim_archive;
        if (archive.try_read("optim", optim_archive)) optimizer_->load(optim_archive);
    }
}

std::string run_pipeline(const RunConfig& cfg, PipelineMode mode, const std::string& data_root,
                         const std::string& out_dir, const std::optional<std::string>& resume) {
    Trainer trainer(cfg, data_root, out_dir, mode);
    write_provenance(out_dir, "train --mode " + to_string(mode), cfg.digest(), cfg.to_json_text(),
                     cfg.seed);
    return trainer.run(resume);
}

Model load_checkpoint_model(const std::string& path, StageTag* tag) {
    if (!fs::exists(path)) throw std::runtime_error("checkpoint not found: " + path);
    torch::serialize::InputArchive archive;
    archive.load_from(path);
    c10::IValue meta_iv;
    archive.read("meta", meta_iv);
    const json meta = json::parse(meta_iv.toStringRef());
    const ModelConfig cfg = ModelConfig::from_json(meta["model_config"].dump());
    auto model = std::make_shared<LandmarkIdNet>(cfg);
    if (meta["has_decoder"].get<bool>()) model->attach_decoder();
    torch::NoGradGuard no_grad;
    for (const auto& p : model->named_parameters()) {
        torch::Tensor t;
        archive.read("param/" + p.key(), t);
        p.value().copy_(t);
    }
    for (const auto& b : model->named_buffers()) {
        torch::Tensor t;
        archive.read("buffer/" + b.key(), t);
        b.value().copy_(t);
    }
    if (tag) *tag = stage_from_string(meta["stage"].get<std::string>());
    model->eval();
    return model;
}

HeatmapConfig checkpoint_heatmap_config(const std::string& path) {
    torch::serialize::InputArchive archive;
    archive.load_from(path);
    c10::IValue meta_iv;
    archive.read("meta", meta_iv);
    const json meta = json::parse(meta_iv.toStringRef());
    HeatmapConfig cfg;
    if (meta.contains("heatmap")) {
        cfg.radius_frac = meta["heatmap"].value("radius_frac", cfg.radius_frac);
        cfg.smoothing_sigma = meta["heatmap"].value("smoothing_sigma", cfg.smoothing_sigma);
    }
    return cfg;
}

}  // namespace lmid
