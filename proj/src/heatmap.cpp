// Copyright (C) 2026 Landmark-Id Authors
// SPDX-License-Identifier: Apache-2.0

#include "lmid/heatmap.hpp"

#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

namespace lmid {

int LandmarkSet::visible_count() const {
    return static_cast<int>(std::count(visible.begin(), visible.end(), true));
}

void LandmarkSet::validate() const {
    if (names.empty()) throw std::invalid_argument("LandmarkSet: k must be >= 1");
    if (coords.size() != names.size() || visible.size() != names.size())
        throw std::invalid_argument("LandmarkSet: field sizes disagree");
    std::set<std::string> uniq(names.begin(), names.end());
    if (uniq.size() != names.size()) throw std::invalid_argument("LandmarkSet: duplicate names");
    for (size_t i = 0; i < coords.size(); ++i) {
        if (visible[i] && (!std::isfinite(coords[i].x) || !std::isfinite(coords[i].y)))
            throw std::invalid_argument("LandmarkSet: non-finite visible coordinate");
    }
}

double HeatmapConfig::sigma_px() const {
    if (smoothing_sigma > 0.0) return smoothing_sigma;
    return std::max(1.0, radius_px() / 4.0);
}

void HeatmapConfig::validate() const {
    if (!(radius_frac > 0.0) || radius_frac > 0.5)
        throw std::invalid_argument("HeatmapConfig: radius_frac must be in (0, 0.5]");
    if (image_size <= 0) throw std::invalid_argument("HeatmapConfig: image_size must be positive");
    if (!(sigma_px() > 0.0)) throw std::invalid_argument("HeatmapConfig: smoothing sigma must be > 0");
}

void MlaConfig::validate() const {
    if (min_visible < 0) throw std::invalid_argument("MlaConfig: min_visible must be >= 0");
    if (drop_prob < 0.0 || drop_prob > 1.0)
        throw std::invalid_argument("MlaConfig: drop_prob must be in [0, 1]");
}

namespace {

std::vector<double> gaussian_kernel(double sigma, int radius) {
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        sum += k[i + radius];
    }
    for (double& v : k) v /= sum;
    return k;
}

}  // namespace

cv::Mat1f render_heatmap(const Point2& lm, bool visible, const HeatmapConfig& cfg) {
    cfg.validate();
    const int n = cfg.image_size;
    cv::Mat1f out(n, n, 0.0f);
    if (!visible) return out;

    const double r = cfg.radius_px();
    const double sigma = cfg.sigma_px();
    // Truncating at floor(3*sigma/sqrt(2)) keeps the plateau exact: the square
    // kernel support of a pixel at distance <= r - 3*sigma stays inside the
    // disk (diagonal reach kr*sqrt(2) <= 3*sigma).
    const int kr = std::max(1, static_cast<int>(std::floor(3.0 * sigma / std::sqrt(2.0))));

    // disk indicator over the padded region the blob can touch
    const int x0 = std::max(0, static_cast<int>(std::floor(lm.x - r)) - kr);
    const int x1 = std::min(n - 1, static_cast<int>(std::ceil(lm.x + r)) + kr);
    const int y0 = std::max(0, static_cast<int>(std::floor(lm.y - r)) - kr);
    const int y1 = std::min(n - 1, static_cast<int>(std::ceil(lm.y + r)) + kr);
    if (x0 > x1 || y0 > y1) return out;  // fully off-image

    const int w = x1 - x0 + 1, h = y1 - y0 + 1;
    std::vector<double> disk(static_cast<size_t>(w) * h, 0.0);
    const double r2 = r * r;
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            const double dx = x - lm.x, dy = y - lm.y;
            if (dx * dx + dy * dy <= r2) disk[static_cast<size_t>(y - y0) * w + (x - x0)] = 1.0;
        }

    // separable convolution with zero padding (in the local window; cells
    // outside it are zero by construction of the padding margin kr)
    const std::vector<double> kern = gaussian_kernel(sigma, kr);
    std::vector<double> tmp(static_cast<size_t>(w) * h, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int t = -kr; t <= kr; ++t) {
                const int xx = x + t;
                if (xx < 0 || xx >= w) continue;
                acc += kern[t + kr] * disk[static_cast<size_t>(y) * w + xx];
            }
            tmp[static_cast<size_t>(y) * w + x] = acc;
        }
    std::vector<double> conv(static_cast<size_t>(w) * h, 0.0);
    double maxv = 0.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int t = -kr; t <= kr; ++t) {
                const int yy = y + t;
                if (yy < 0 || yy >= h) continue;
                acc += kern[t + kr] * tmp[static_cast<size_t>(yy) * w + x];
            }
            conv[static_cast<size_t>(y) * w + x] = acc;
            maxv = std::max(maxv, acc);
        }
    if (maxv <= 0.0) return out;

    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x)
            out(y, x) = static_cast<float>(conv[static_cast<size_t>(y - y0) * w + (x - x0)] / maxv);
    return out;
}

HeatmapStack render_stack(const LandmarkSet& lms, const HeatmapConfig& cfg) {
    HeatmapStack stack;
    stack.maps.reserve(lms.names.size());
    for (size_t i = 0; i < lms.names.size(); ++i)
        stack.maps.push_back(render_heatmap(lms.coords[i], lms.visible[i], cfg));
    return stack;
}

LandmarkSet apply_nla(const LandmarkSet& lms, const HeatmapConfig& cfg, Rng& rng) {
    const double r = cfg.radius_px();
    LandmarkSet out = lms;
    for (size_t i = 0; i < out.coords.size(); ++i) {
        if (!out.visible[i]) continue;
        // uniform over the disk of radius r
        const double rho = r * std::sqrt(uniform(rng, 0.0, 1.0));
        const double phi = uniform(rng, 0.0, 2.0 * CV_PI);
        out.coords[i].x += rho * std::cos(phi);
        out.coords[i].y += rho * std::sin(phi);
    }
    return out;
}

LandmarkSet apply_mla(const LandmarkSet& lms, const MlaConfig& cfg, Rng& rng) {
    cfg.validate();
    LandmarkSet out = lms;
    std::vector<int> order;
    for (int i = 0; i < out.k(); ++i)
        if (out.visible[i]) order.push_back(i);
    std::shuffle(order.begin(), order.end(), rng);
    int count = static_cast<int>(order.size());
    for (int idx : order) {
        if (count <= cfg.min_visible) break;
        if (uniform(rng, 0.0, 1.0) < cfg.drop_prob) {
            out.visible[idx] = false;
            --count;
        }
    }
    return out;
}

cv::Matx23d sample_similarity(Rng& rng, const AugmentLimits& limits, cv::Size image_size) {
    const double angle = uniform(rng, -limits.max_rotation_deg, limits.max_rotation_deg);
    const double zoom = 1.0 + uniform(rng, -limits.max_zoom_frac, limits.max_zoom_frac);
    const double tx = uniform(rng, -limits.max_translate_frac, limits.max_translate_frac) * image_size.width;
    const double ty = uniform(rng, -limits.max_translate_frac, limits.max_translate_frac) * image_size.height;
    const cv::Point2d center((image_size.width - 1) / 2.0, (image_size.height - 1) / 2.0);
    cv::Mat rot = cv::getRotationMatrix2D(center, angle, zoom);
    cv::Matx23d m;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 3; ++j) m(i, j) = rot.at<double>(i, j);
    m(0, 2) += tx;
    m(1, 2) += ty;
    return m;
}

JointAugmentResult apply_similarity(const cv::Mat& image, const LandmarkSet& lms,
                                    const cv::Matx23d& m) {
    JointAugmentResult res;
    cv::warpAffine(image, res.image, m, image.size(), cv::INTER_LINEAR, cv::BORDER_REFLECT_101);
    res.landmarks = lms;
    for (size_t i = 0; i < lms.coords.size(); ++i) {
        if (!lms.visible[i]) continue;
        const Point2& p = lms.coords[i];
        const double x = m(0, 0) * p.x + m(0, 1) * p.y + m(0, 2);
        const double y = m(1, 0) * p.x + m(1, 1) * p.y + m(1, 2);
        res.landmarks.coords[i] = {x, y};
        if (x < 0.0 || y < 0.0 || x > image.cols - 1.0 || y > image.rows - 1.0)
            res.landmarks.visible[i] = false;
    }
    return res;
}

JointAugmentResult joint_augment(const cv::Mat& image, const LandmarkSet& lms, Rng& rng,
                                 const AugmentLimits& limits) {
    return apply_similarity(image, lms, sample_similarity(rng, limits, image.size()));
}

}  // namespace lmid
