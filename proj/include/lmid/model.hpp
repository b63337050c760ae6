// Copyright (C) 2026 Landmark-Id Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <torch/torch.h>

#include <memory>
#include <string>
#include <vector>

namespace lmid {

enum class BackboneKind { standard_resnet50, small_residual };

BackboneKind backbone_from_string(const std::string& s);
std::string to_string(BackboneKind kind);

struct ModelConfig {
    int k = 3;                 // landmark channels; 0 degenerates to the baseline
    int n_train_classes = 1;
    int embed_dim = 256;
    BackboneKind backbone = BackboneKind::small_residual;
    int base_width = 24;       // small-residual stem width
    bool pretrained = false;
    std::string pretrained_weights;  // named-tensor archive, required when pretrained

    void validate() const;
    std::string to_json() const;
    static ModelConfig from_json(const std::string& json_text);
};

struct ModelOutput {
    torch::Tensor embedding;  // B x embed_dim, pre-neck features f
    torch::Tensor logits;     // B x n_train_classes, ID prediction p
    torch::Tensor recon;      // B x k x 64 x 64 sigmoid heatmaps; channel dim 0 without decoder
};

// Which tensors came from the donor checkpoint vs fresh initialization.
struct InitReport {
    std::vector<std::string> pretrained;
    std::vector<std::string> random;
};

enum class StageTag { s1a, s1b, s2a, s2b };

StageTag stage_from_string(const std::string& s);
std::string to_string(StageTag tag);

struct ParameterGroups {
    std::vector<std::string> trainable;
    std::vector<std::string> frozen;
};

class LandmarkIdNet : public torch::nn::Module {
  public:
    explicit LandmarkIdNet(const ModelConfig& cfg);

    // Input must be (3 + k) x H x W with H, W divisible by 32.
    ModelOutput forward(const torch::Tensor& input);

    // Adds the heatmap reconstruction block (random init). Requires k > 0.
    void attach_decoder();
    bool has_decoder() const { return static_cast<bool>(decoder_); }

    const ModelConfig& config() const { return cfg_; }
    int input_channels() const { return 3 + cfg_.k; }

  private:
    torch::Tensor backbone_forward(const torch::Tensor& x);

    ModelConfig cfg_;
    int feature_dim_ = 0;

    // small-residual pieces
    torch::nn::Sequential stem_{nullptr};
    std::vector<torch::nn::Sequential> blocks_;
    std::vector<torch::nn::Sequential> shortcuts_;

    // resnet50 pieces
    torch::nn::Conv2d conv1_{nullptr};
    torch::nn::BatchNorm2d bn1_{nullptr};
    torch::nn::Sequential layer1_{nullptr}, layer2_{nullptr}, layer3_{nullptr}, layer4_{nullptr};

    torch::nn::Linear embed_fc_{nullptr};
    torch::nn::BatchNorm1d neck_{nullptr};
    torch::nn::Linear classifier_{nullptr};

    torch::nn::Sequential decoder_{nullptr};
};

using Model = std::shared_ptr<LandmarkIdNet>;

// Builds the network and initializes parameters. With cfg.pretrained, every
// backbone tensor except the first convolution is copied from the donor
// archive (heads and decoder stay random); throws if the archive is missing
// or does not cover the backbone.
Model init_parameters(const ModelConfig& cfg, InitReport* report = nullptr);

// Partition of all parameter names for the two-stage schedule:
//   1a: first conv + classifier trainable, rest frozen
//   1b: everything except the decoder
//   2a: decoder only
//   2b: everything
ParameterGroups parameter_groups(const LandmarkIdNet& model, StageTag stage);

// Sets requires_grad per the partition and puts fully-frozen normalization
// modules in eval mode so their running statistics stay fixed.
void apply_parameter_groups(LandmarkIdNet& model, const ParameterGroups& groups);

// FNV digest over the named parameter tensors (sorted by name).
std::uint64_t parameters_digest(const LandmarkIdNet& model, const std::vector<std::string>& names);
std::uint64_t parameters_digest(const LandmarkIdNet& model);

// Named-tensor archive helpers (also used for donor/pretrained files).
void save_named_tensors(const std::string& path,
                        const std::vector<std::pair<std::string, torch::Tensor>>& tensors);
std::vector<std::pair<std::string, torch::Tensor>> load_named_tensors(const std::string& path);

}  // namespace lmid
