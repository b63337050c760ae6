// Copyright (C) 2026 Landmark-Id Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <opencv2/core.hpp>

#include <string>
#include <vector>

#include "lmid/geometry.hpp"
#include "lmid/rng.hpp"

namespace lmid {

// Named 2-D body landmarks with per-landmark visibility.
struct LandmarkSet {
    std::vector<std::string> names;
    std::vector<Point2> coords;
    std::vector<bool> visible;

    int k() const { return static_cast<int>(names.size()); }
    int visible_count() const;
    void validate() const;  // throws on duplicate names, k < 1, non-finite visible coords
};

struct HeatmapConfig {
    double radius_frac = 0.05;      // blob radius as a fraction of image size
    double smoothing_sigma = 0.0;   // px; <= 0 selects max(1, radius / 4)
    int image_size = 128;

    double radius_px() const { return radius_frac * image_size; }
    double sigma_px() const;
    void validate() const;
};

struct MlaConfig {
    int min_visible = 2;    // M
    double drop_prob = 0.5; // p_mla
    void validate() const;
};

// k single-channel likelihood maps in [0, 1]; channel i is all-zero iff
// landmark i is not visible.
struct HeatmapStack {
    std::vector<cv::Mat1f> maps;

    int k() const { return static_cast<int>(maps.size()); }
};

// White disk of radius radius_px() centered at lm, convolved with a Gaussian
// (separable, zero padding, kernel truncated at floor(3*sigma)), then scaled
// so the maximum is 1. The interior keeps a flat plateau of exactly 1.
// Invisible landmarks produce an all-zero map. Off-image centers are allowed;
// the blob is clipped (all-zero if fully off-image).
cv::Mat1f render_heatmap(const Point2& lm, bool visible, const HeatmapConfig& cfg);

// One channel per landmark, in lms.names order.
HeatmapStack render_stack(const LandmarkSet& lms, const HeatmapConfig& cfg);

// Noisy landmark augmentation: each visible landmark is displaced by a vector
// drawn uniformly from the disk of radius radius_px(), so the true point
// always stays inside the blob. Visibility is unchanged; the caller keeps the
// unshifted truth.
LandmarkSet apply_nla(const LandmarkSet& lms, const HeatmapConfig& cfg, Rng& rng);

// Missing landmark augmentation: visit visible landmarks in a random order
// and drop each with probability drop_prob while more than min_visible
// remain. Never resurrects a hidden landmark.
LandmarkSet apply_mla(const LandmarkSet& lms, const MlaConfig& cfg, Rng& rng);

struct AugmentLimits {
    double max_rotation_deg = 360.0;
    double max_zoom_frac = 0.2;       // scale in [1 - z, 1 + z]
    double max_translate_frac = 0.2;  // of image size, each axis
};

struct JointAugmentResult {
    cv::Mat image;
    LandmarkSet landmarks;
};

// Samples one similarity transform (rotation about center, isotropic zoom,
// translation), resamples the image bilinearly and maps coordinates
// analytically with the same matrix. Landmarks leaving the frame are marked
// not-visible.
JointAugmentResult joint_augment(const cv::Mat& image, const LandmarkSet& lms, Rng& rng,
                                 const AugmentLimits& limits);

// The transform sampled by joint_augment, exposed for tests: a 2x3 affine
// matrix in the convention (x,y) -> (m00 x + m01 y + m02, m10 x + m11 y + m12).
cv::Matx23d sample_similarity(Rng& rng, const AugmentLimits& limits, cv::Size image_size);
JointAugmentResult apply_similarity(const cv::Mat& image, const LandmarkSet& lms,
                                    const cv::Matx23d& m);

}  // namespace lmid
