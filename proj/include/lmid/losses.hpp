// Copyright (C) 2026 Landmark-Id Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <torch/torch.h>

#include <optional>

namespace lmid {

struct LossWeights {
    double alpha = 1.0;           // heatmap reconstruction weight
    double beta = 0.0005;         // center loss weight
    double triplet_margin = 0.3;
    double smooth_eps = 0.1;      // label smoothing epsilon

    void validate() const;
};

// Smoothed cross entropy: target (1 - eps) on the true class and
// eps / (C - 1) on the others, averaged over the batch.
torch::Tensor id_loss(const torch::Tensor& logits, const torch::Tensor& labels, double smooth_eps);

// Batch-hard triplet loss on Euclidean distances: per anchor, hardest
// positive minus hardest negative plus margin, hinged at zero, averaged.
// Throws if any anchor lacks a positive or a negative.
torch::Tensor triplet_loss(const torch::Tensor& embeddings, const torch::Tensor& labels,
                           double margin);

// Per-class embedding centers with the decoupled update rule of the center
// loss: centers move toward batch class means at update_lr, outside the main
// optimizer.
class CenterState {
  public:
    CenterState(int n_classes, int dim, double update_lr,
                torch::Dtype dtype = torch::kFloat32);

    // 1/2 * mean squared Euclidean distance to the label's center.
    // Differentiable w.r.t. embeddings; centers are treated as constants.
    torch::Tensor loss(const torch::Tensor& embeddings, const torch::Tensor& labels) const;

    // c_j -= lr * sum_{i: y_i = j}(c_j - x_i) / (1 + count_j)
    void update(const torch::Tensor& embeddings, const torch::Tensor& labels);

    torch::Tensor& centers() { return centers_; }
    const torch::Tensor& centers() const { return centers_; }
    double update_lr() const { return update_lr_; }

  private:
    torch::Tensor centers_;
    double update_lr_;
};

// Mean binary cross entropy over all pixels and channels.
torch::Tensor recon_loss(const torch::Tensor& recon, const torch::Tensor& target);

struct LossParts {
    std::optional<torch::Tensor> id;
    std::optional<torch::Tensor> triplet;
    std::optional<torch::Tensor> center;
    std::optional<torch::Tensor> hr;
};

// L = L_ID + L_Triplet + beta * L_Center + alpha * L_HR over the parts that
// are present. Throws naming the offending term if any part is non-finite.
torch::Tensor total_loss(const LossParts& parts, const LossWeights& w);

}  // namespace lmid
