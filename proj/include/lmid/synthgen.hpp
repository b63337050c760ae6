// Copyright (C) 2026 Landmark-Id Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <opencv2/core.hpp>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "lmid/dataio.hpp"
#include "lmid/geometry.hpp"
#include "lmid/heatmap.hpp"
#include "lmid/rng.hpp"

namespace lmid {

struct EllipseSpec {
    Point2 center;
    double semi_major = 0.0;
    double semi_minor = 0.0;
    double angle_deg = 0.0;
};

// Canonical frontal view of one identity: black filled ellipses on white,
// all inside the landmark triangle.
struct SeedPattern {
    int identity_id = 0;
    cv::Mat1b canvas;
    std::array<Point2, 3> triangle;
    std::vector<EllipseSpec> ellipses;
    std::uint64_t rng_seed = 0;
};

struct ExamplesPerSplit {
    int train = 3;
    int gallery = 3;
    int query = 5;
};

struct SynthConfig {
    int n_identities = 750;  // per subset: train gets this many, eval the same
    int image_size = 128;
    ExamplesPerSplit examples_per_split;
    int ellipse_count_min = 1;
    int ellipse_count_max = 8;
    double corner_jitter_frac = 0.15;
    std::string texture_dir;  // empty selects the built-in procedural bank
    double noise_sigma = 8.0;
    std::uint64_t master_seed = 0;

    void validate() const;
};

// Grayscale texture patches for pattern/background fills. Loaded from a
// directory of images, or synthesized deterministically when none is given.
class TextureBank {
  public:
    static TextureBank from_directory(const std::string& dir);
    static TextureBank procedural(std::uint64_t seed, int count = 24, int size = 256);

    bool empty() const { return textures_.empty(); }
    size_t size() const { return textures_.size(); }

    // Random crop resized to side x side, intensities mapped linearly onto
    // [lo, hi].
    cv::Mat1b random_patch(Rng& rng, int side, int lo, int hi) const;

  private:
    std::vector<cv::Mat1b> textures_;
};

struct RenderedExample {
    cv::Mat1b image;
    LandmarkSet landmarks;
};

// Deterministic in (cfg.master_seed, identity_id). Rejection-samples ellipses
// until the drawn count fits ellipse_count_min..max with every ellipse inside
// the triangle; throws if 10000 attempts cannot place the minimum count.
SeedPattern generate_seed_pattern(int identity_id, const SynthConfig& cfg);

// Canonical landmark triangle shared by all identities, in pixels.
std::array<Point2, 3> canonical_triangle(int image_size);

// Warps the seed canvas by h, fills pattern and background from texture
// patches (pattern mapped to [0,120], background to [160,255]), converts to
// grayscale with additive Gaussian noise clipped to [0,255]. Landmarks are
// warp_point images of the triangle corners; off-image ones are not visible.
RenderedExample render_sample(const SeedPattern& seed, const Homography& h,
                              const TextureBank& textures, Rng& rng, const SynthConfig& cfg);

// Generates the full train/gallery/query tree under out_root, writes
// manifest.json + landmarks.csv, and returns the manifest. Identity streams
// are derived from (master_seed, identity, example) so regeneration is
// byte-identical.
DatasetManifest build_dataset(const SynthConfig& cfg, const std::string& out_root);

}  // namespace lmid
