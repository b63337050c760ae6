// Copyright (C) 2026 Landmark-Id Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <torch/torch.h>

#include <opencv2/core.hpp>

#include <array>
#include <string>

#include "lmid/heatmap.hpp"
#include "lmid/model.hpp"

namespace lmid {

struct ImageNorm {
    std::array<double, 3> mean{0.5, 0.5, 0.5};
    std::array<double, 3> std{0.5, 0.5, 0.5};
};

// Backbone input convention: ImageNet statistics when pretrained, symmetric
// unit scaling otherwise.
ImageNorm norm_for(const ModelConfig& cfg);

cv::Mat1b load_gray_image(const std::string& root, const std::string& rel_path);

// Grayscale image replicated to 3 normalized channels.
torch::Tensor image_to_tensor(const cv::Mat1b& img, const ImageNorm& norm = {});

// k raw [0,1] heatmap channels appended to the image channels. k = 0 yields
// a plain 3-channel tensor; heatmap_cfg.image_size must match the image.
torch::Tensor sample_to_tensor(const cv::Mat1b& img, const LandmarkSet& lms, int k,
                               const HeatmapConfig& heatmap_cfg, const ImageNorm& norm = {});

torch::Tensor stack_to_tensor(const HeatmapStack& stack);

}  // namespace lmid
