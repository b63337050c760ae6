// Copyright (C) 2026 Landmark-Id Authors
// SPDX-License-Identifier: Apache-2.0

#include "lmid/tensorize.hpp"

#include <opencv2/imgcodecs.hpp>

#include <filesystem>
#include <stdexcept>

namespace lmid {

ImageNorm norm_for(const ModelConfig& cfg) {
    if (cfg.pretrained) return {{0.485, 0.456, 0.406}, {0.229, 0.224, 0.225}};
    return {};
}

cv::Mat1b load_gray_image(const std::string& root, const std::string& rel_path) {
    const auto path = (std::filesystem::path(root) / rel_path).string();
    cv::Mat1b img = cv::imread(path, cv::IMREAD_GRAYSCALE);
    if (img.empty()) throw std::runtime_error("cannot read image: " + path);
    return img;
}

torch::Tensor image_to_tensor(const cv::Mat1b& img, const ImageNorm& norm) {
    auto gray = torch::empty({img.rows, img.cols}, torch::kFloat32);
    float* dst = gray.data_ptr<float>();
    for (int y = 0; y < img.rows; ++y)
        for (int x = 0; x < img.cols; ++x) *dst++ = img(y, x) / 255.0f;
    std::vector<torch::Tensor> channels;
    for (int c = 0; c < 3; ++c) channels.push_back((gray - norm.mean[c]) / norm.std[c]);
    return torch::stack(channels);
}

torch::Tensor stack_to_tensor(const HeatmapStack& stack) {
    std::vector<torch::Tensor> channels;
    channels.reserve(stack.maps.size());
    for (const cv::Mat1f& m : stack.maps) {
        auto t = torch::empty({m.rows, m.cols}, torch::kFloat32);
        for (int y = 0; y < m.rows; ++y)
            std::memcpy(t.data_ptr<float>() + static_cast<size_t>(y) * m.cols, m.ptr<float>(y),
                        sizeof(float) * m.cols);
        channels.push_back(t);
    }
    return torch::stack(channels);
}

torch::Tensor sample_to_tensor(const cv::Mat1b& img, const LandmarkSet& lms, int k,
                               const HeatmapConfig& heatmap_cfg, const ImageNorm& norm) {
    auto image = image_to_tensor(img, norm);
    if (k == 0) return image;
    if (lms.k() != k) throw std::runtime_error("sample_to_tensor: landmark count mismatch");
    HeatmapConfig cfg = heatmap_cfg;
    cfg.image_size = img.rows;
    return torch::cat({image, stack_to_tensor(render_stack(lms, cfg))});
}

}  // namespace lmid
