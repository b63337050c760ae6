// Copyright (C) 2026 Landmark-Id Authors
// SPDX-License-Identifier: Apache-2.0

#include "lmid/losses.hpp"

#include <stdexcept>

namespace lmid {

void LossWeights::validate() const {
    if (alpha < 0.0) throw std::invalid_argument("LossWeights: alpha must be >= 0");
    if (beta < 0.0) throw std::invalid_argument("LossWeights: beta must be >= 0");
    if (triplet_margin < 0.0) throw std::invalid_argument("LossWeights: margin must be >= 0");
    if (smooth_eps < 0.0 || smooth_eps >= 1.0)
        throw std::invalid_argument("LossWeights: smooth_eps must be in [0, 1)");
}

torch::Tensor id_loss(const torch::Tensor& logits, const torch::Tensor& labels, double smooth_eps) {
    const auto classes = logits.size(1);
    TORCH_CHECK(labels.max().item<int64_t>() < classes, "id_loss: label out of range");
    const double off = classes > 1 ? smooth_eps / static_cast<double>(classes - 1) : 0.0;
    auto targets = torch::full_like(logits, off);
    targets.scatter_(1, labels.view({-1, 1}), 1.0 - smooth_eps);
    const auto logp = torch::log_softmax(logits, 1);
    return -(targets * logp).sum(1).mean();
}

torch::Tensor triplet_loss(const torch::Tensor& embeddings, const torch::Tensor& labels,
                           double margin) {
    const auto n = embeddings.size(0);
    const auto dists = torch::cdist(embeddings, embeddings);
    const auto same = labels.view({-1, 1}).eq(labels.view({1, -1}));
    const auto eye = torch::eye(n, torch::TensorOptions().dtype(torch::kBool).device(embeddings.device()));
    const auto pos_mask = same & ~eye;
    const auto neg_mask = ~same;
    TORCH_CHECK(pos_mask.any(1).all().item<bool>(),
                "triplet_loss: an anchor has no positive (sampler violation)");
    TORCH_CHECK(neg_mask.any(1).all().item<bool>(),
                "triplet_loss: an anchor has no negative (sampler violation)");
    const auto inf = std::numeric_limits<float>::infinity();
    const auto hardest_pos = dists.masked_fill(~pos_mask, -inf).amax(1);
    const auto hardest_neg = dists.masked_fill(~neg_mask, inf).amin(1);
    return torch::relu(hardest_pos - hardest_neg + margin).mean();
}

CenterState::CenterState(int n_classes, int dim, double update_lr, torch::Dtype dtype)
    : centers_(torch::zeros({n_classes, dim}, torch::TensorOptions().dtype(dtype))),
      update_lr_(update_lr) {}

torch::Tensor CenterState::loss(const torch::Tensor& embeddings, const torch::Tensor& labels) const {
    const auto own = centers_.index_select(0, labels).detach();
    return 0.5 * (embeddings - own).pow(2).sum(1).mean();
}

void CenterState::update(const torch::Tensor& embeddings, const torch::Tensor& labels) {
    torch::NoGradGuard no_grad;
    const auto x = embeddings.detach().to(centers_.dtype());
    const auto uniq = std::get<0>(torch::_unique(labels));
    for (int64_t i = 0; i < uniq.size(0); ++i) {
        const auto label = uniq[i];
        const auto mask = labels.eq(label);
        const auto members = x.index({mask});
        const auto count = static_cast<double>(members.size(0));
        const auto delta = (centers_[label.item<int64_t>()] - members).sum(0) / (1.0 + count);
        centers_[label.item<int64_t>()] -= update_lr_ * delta;
    }
}

torch::Tensor recon_loss(const torch::Tensor& recon, const torch::Tensor& target) {
    TORCH_CHECK(recon.sizes() == target.sizes(), "recon_loss: shape mismatch ", recon.sizes(),
                " vs ", target.sizes());
    // clamp keeps saturated sigmoid outputs from producing inf * 0
    const auto log_r = torch::log(recon.clamp_min(1e-12));
    const auto log_1r = torch::log((1.0 - recon).clamp_min(1e-12));
    return -(target * log_r + (1.0 - target) * log_1r).mean();
}

torch::Tensor total_loss(const LossParts& parts, const LossWeights& w) {
    auto check = [](const std::optional<torch::Tensor>& t, const char* name) {
        if (t && !torch::isfinite(*t).all().item<bool>())
            throw std::runtime_error(std::string("total_loss: non-finite ") + name + " term");
    };
    check(parts.id, "ID");
    check(parts.triplet, "Triplet");
    check(parts.center, "Center");
    check(parts.hr, "HR");

    std::optional<torch::Tensor> total;
    auto add = [&](const torch::Tensor& t) { total = total ? *total + t : t; };
    if (parts.id) add(*parts.id);
    if (parts.triplet) add(*parts.triplet);
    if (parts.center) add(w.beta * *parts.center);
    if (parts.hr) add(w.alpha * *parts.hr);
    TORCH_CHECK(total.has_value(), "total_loss: no loss parts present");
    return *total;
}

}  // namespace lmid
