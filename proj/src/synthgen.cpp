// Copyright (C) 2026 Landmark-Id Authors
// SPDX-License-Identifier: Apache-2.0

#include "lmid/synthgen.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>

#include "lmid/digest.hpp"

namespace fs = std::filesystem;

namespace lmid {

void SynthConfig::validate() const {
    if (n_identities < 1) throw std::invalid_argument("SynthConfig: n_identities must be >= 1");
    if (image_size < 32) throw std::invalid_argument("SynthConfig: image_size must be >= 32");
    if (corner_jitter_frac < 0.0 || corner_jitter_frac >= 0.5)
        throw std::invalid_argument("SynthConfig: corner_jitter_frac must be in [0, 0.5)");
    if (ellipse_count_min < 1) throw std::invalid_argument("SynthConfig: ellipse_count_min must be >= 1");
    if (ellipse_count_max < ellipse_count_min)
        throw std::invalid_argument("SynthConfig: ellipse_count_max < ellipse_count_min");
    if (noise_sigma < 0.0) throw std::invalid_argument("SynthConfig: noise_sigma must be >= 0");
    if (examples_per_split.train < 1 || examples_per_split.gallery < 1 || examples_per_split.query < 1)
        throw std::invalid_argument("SynthConfig: examples_per_split entries must be >= 1");
}

std::array<Point2, 3> canonical_triangle(int image_size) {
    const double s = image_size - 1.0;
    return {{{0.50 * s, 0.14 * s}, {0.16 * s, 0.84 * s}, {0.84 * s, 0.84 * s}}};
}

namespace {

bool point_in_triangle(const Point2& p, const std::array<Point2, 3>& t) {
    auto side = [](const Point2& a, const Point2& b, const Point2& c) {
        return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    };
    const double d1 = side(t[0], t[1], p);
    const double d2 = side(t[1], t[2], p);
    const double d3 = side(t[2], t[0], p);
    const bool has_neg = d1 < 0 || d2 < 0 || d3 < 0;
    const bool has_pos = d1 > 0 || d2 > 0 || d3 > 0;
    return !(has_neg && has_pos);
}

bool ellipse_in_triangle(const EllipseSpec& e, const std::array<Point2, 3>& tri) {
    // boundary sampling with a half-pixel rasterization margin
    const double rad = e.angle_deg * CV_PI / 180.0;
    const double ca = std::cos(rad), sa = std::sin(rad);
    for (int i = 0; i < 48; ++i) {
        const double phi = 2.0 * CV_PI * i / 48;
        const double ex = (e.semi_major + 0.5) * std::cos(phi);
        const double ey = (e.semi_minor + 0.5) * std::sin(phi);
        const Point2 p{e.center.x + ex * ca - ey * sa, e.center.y + ex * sa + ey * ca};
        if (!point_in_triangle(p, tri)) return false;
    }
    return true;
}

}  // namespace

SeedPattern generate_seed_pattern(int identity_id, const SynthConfig& cfg) {
    cfg.validate();
    SeedPattern out;
    out.identity_id = identity_id;
    out.rng_seed = derive_seed(cfg.master_seed, static_cast<std::uint64_t>(identity_id));
    out.triangle = canonical_triangle(cfg.image_size);
    out.canvas = cv::Mat1b(cfg.image_size, cfg.image_size, uchar(255));

    Rng rng = make_rng(out.rng_seed);
    const int target = uniform_int(rng, cfg.ellipse_count_min, cfg.ellipse_count_max);
    const double s = cfg.image_size;

    double min_x = s, max_x = 0, min_y = s, max_y = 0;
    for (const Point2& c : out.triangle) {
        min_x = std::min(min_x, c.x);
        max_x = std::max(max_x, c.x);
        min_y = std::min(min_y, c.y);
        max_y = std::max(max_y, c.y);
    }

    int attempts = 0;
    while (static_cast<int>(out.ellipses.size()) < target && attempts < 10000) {
        ++attempts;
        EllipseSpec e;
        e.center = {uniform(rng, min_x, max_x), uniform(rng, min_y, max_y)};
        e.semi_major = uniform(rng, 0.02 * s, 0.09 * s);
        e.semi_minor = uniform(rng, 0.02 * s, e.semi_major);
        e.angle_deg = uniform(rng, 0.0, 180.0);
        if (ellipse_in_triangle(e, out.triangle)) out.ellipses.push_back(e);
    }
    if (static_cast<int>(out.ellipses.size()) < cfg.ellipse_count_min)
        throw std::runtime_error("generate_seed_pattern: could not place " +
                                 std::to_string(cfg.ellipse_count_min) +
                                 " ellipse(s) in 10000 attempts; degenerate config");

    for (const EllipseSpec& e : out.ellipses) {
        cv::ellipse(out.canvas, cv::Point2d(e.center.x, e.center.y),
                    cv::Size2d(e.semi_major, e.semi_minor), e.angle_deg, 0.0, 360.0,
                    cv::Scalar(0), cv::FILLED, cv::LINE_8);
    }
    return out;
}

TextureBank TextureBank::from_directory(const std::string& dir) {
    TextureBank bank;
    if (!fs::is_directory(dir))
        throw std::runtime_error("TextureBank: not a directory: " + dir);
    std::vector<std::string> paths;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file()) paths.push_back(entry.path().string());
    std::sort(paths.begin(), paths.end());
    for (const std::string& p : paths) {
        cv::Mat img = cv::imread(p, cv::IMREAD_GRAYSCALE);
        if (!img.empty()) bank.textures_.push_back(img);
    }
    if (bank.textures_.empty())
        throw std::runtime_error("TextureBank: no readable images under " + dir);
    return bank;
}

TextureBank TextureBank::procedural(std::uint64_t seed, int count, int size) {
    TextureBank bank;
    for (int t = 0; t < count; ++t) {
        Rng rng = make_rng(derive_seed(seed, 0x7e87ULL, static_cast<std::uint64_t>(t)));
        cv::Mat1f field(size, size);
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) field(y, x) = static_cast<float>(uniform(rng, 0.0, 1.0));
        const int blur = 2 * uniform_int(rng, 2, 8) + 1;
        cv::GaussianBlur(field, field, cv::Size(blur, blur), 0.0);
        // low-frequency ripple, loosely caustic-like
        const double fx = uniform(rng, 1.0, 5.0), fy = uniform(rng, 1.0, 5.0);
        const double phase = uniform(rng, 0.0, 2.0 * CV_PI);
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x)
                field(y, x) += 0.4f * static_cast<float>(
                                   std::sin(2.0 * CV_PI * (fx * x + fy * y) / size + phase));
        cv::normalize(field, field, 0.0, 255.0, cv::NORM_MINMAX);
        cv::Mat1b tex;
        field.convertTo(tex, CV_8U);
        bank.textures_.push_back(tex);
    }
    return bank;
}

cv::Mat1b TextureBank::random_patch(Rng& rng, int side, int lo, int hi) const {
    if (textures_.empty()) throw std::runtime_error("TextureBank: texture source empty");
    const cv::Mat1b& tex = textures_[uniform_int(rng, 0, static_cast<int>(textures_.size()) - 1)];
    cv::Mat1b crop;
    if (tex.cols >= side && tex.rows >= side) {
        const int x = uniform_int(rng, 0, tex.cols - side);
        const int y = uniform_int(rng, 0, tex.rows - side);
        crop = tex(cv::Rect(x, y, side, side)).clone();
    } else {
        cv::resize(tex, crop, cv::Size(side, side), 0, 0, cv::INTER_LINEAR);
    }
    double mn = 0.0, mx = 0.0;
    cv::minMaxLoc(crop, &mn, &mx);
    cv::Mat1b out(side, side);
    if (mx <= mn) {
        out.setTo((lo + hi) / 2);
        return out;
    }
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x)
            out(y, x) = cv::saturate_cast<uchar>(lo + (crop(y, x) - mn) * (hi - lo) / (mx - mn));
    return out;
}

RenderedExample render_sample(const SeedPattern& seed, const Homography& h,
                              const TextureBank& textures, Rng& rng, const SynthConfig& cfg) {
    if (textures.empty()) throw std::runtime_error("render_sample: texture source empty");
    const int s = cfg.image_size;

    cv::Matx33d hm;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) hm(i, j) = h.m[i][j];
    cv::Mat1b warped;
    cv::warpPerspective(seed.canvas, warped, hm, cv::Size(s, s), cv::INTER_LINEAR,
                        cv::BORDER_CONSTANT, cv::Scalar(255));

    const cv::Mat1b pattern_tex = textures.random_patch(rng, s, 0, 120);
    const cv::Mat1b background_tex = textures.random_patch(rng, s, 160, 255);

    RenderedExample out;
    out.image = cv::Mat1b(s, s);
    std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
    for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x) {
            const double alpha = (255.0 - warped(y, x)) / 255.0;  // 1 inside the pattern
            double v = alpha * pattern_tex(y, x) + (1.0 - alpha) * background_tex(y, x);
            if (cfg.noise_sigma > 0.0) v += noise(rng);
            out.image(y, x) = cv::saturate_cast<uchar>(v);
        }

    out.landmarks.names = {"apex", "base_left", "base_right"};
    for (const Point2& corner : seed.triangle) {
        const Point2 p = warp_point(h, corner);
        out.landmarks.coords.push_back(p);
        out.landmarks.visible.push_back(p.x >= 0.0 && p.y >= 0.0 && p.x <= s - 1.0 &&
                                        p.y <= s - 1.0);
    }
    return out;
}

DatasetManifest build_dataset(const SynthConfig& cfg, const std::string& out_root) {
    cfg.validate();
    const TextureBank textures = cfg.texture_dir.empty()
                                     ? TextureBank::procedural(cfg.master_seed)
                                     : TextureBank::from_directory(cfg.texture_dir);

    DatasetManifest manifest;
    manifest.root = out_root;
    manifest.k = 3;
    manifest.landmark_names = {"apex", "base_left", "base_right"};
    manifest.provenance.seed = cfg.master_seed;
    manifest.provenance.config_digest =
        hex64(fnv1a64(std::to_string(cfg.n_identities) + "/" + std::to_string(cfg.image_size) +
                      "/" + std::to_string(cfg.master_seed)));

    std::error_code ec;
    fs::create_directories(out_root, ec);
    if (ec) throw std::runtime_error("build_dataset: cannot create " + out_root + ": " + ec.message());

    struct SplitJob {
        Split split;
        int count;
        int global_base;  // example stream offset within the identity
    };

    auto emit_identity = [&](int global_id, int label, const std::vector<SplitJob>& jobs) {
        const SeedPattern seed = generate_seed_pattern(global_id, cfg);
        for (const SplitJob& job : jobs) {
            const fs::path dir = fs::path(out_root) / to_string(job.split) / std::to_string(global_id);
            fs::create_directories(dir, ec);
            if (ec) throw std::runtime_error("build_dataset: cannot create " + dir.string());
            for (int e = 0; e < job.count; ++e) {
                Rng rng = make_rng(derive_seed(cfg.master_seed, static_cast<std::uint64_t>(global_id),
                                               static_cast<std::uint64_t>(job.global_base + e)));
                const Homography h =
                    sample_homography(rng, {cfg.corner_jitter_frac, cfg.image_size});
                RenderedExample rendered = render_sample(seed, h, textures, rng, cfg);
                const fs::path file = dir / (std::to_string(e) + ".png");
                if (!cv::imwrite(file.string(), rendered.image))
                    throw std::runtime_error("build_dataset: cannot write " + file.string());
                Sample sample;
                sample.image_path = to_string(job.split) + "/" + std::to_string(global_id) + "/" +
                                    std::to_string(e) + ".png";
                sample.identity_label = label;
                sample.landmarks = std::move(rendered.landmarks);
                sample.split = job.split;
                manifest.samples.push_back(std::move(sample));
            }
        }
    };

    const int n = cfg.n_identities;
    for (int id = 0; id < n; ++id) {
        manifest.identity_index.push_back("id-" + std::to_string(id));
        emit_identity(id, id, {{Split::train, cfg.examples_per_split.train, 0}});
    }
    for (int id = n; id < 2 * n; ++id) {
        manifest.identity_index.push_back("id-" + std::to_string(id));
        emit_identity(id, id,
                      {{Split::gallery, cfg.examples_per_split.gallery, 0},
                       {Split::query, cfg.examples_per_split.query, cfg.examples_per_split.gallery}});
    }

    save_manifest(manifest);
    return manifest;
}

}  // namespace lmid
