// Copyright (C) 2026 Landmark-Id Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>

#include "lmid/rng.hpp"

namespace lmid {

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

// Plane projective transform, row-major 3x3 with h[2][2] normalized to 1.
struct Homography {
    std::array<std::array<double, 3>, 3> m{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};

    static Homography identity() { return {}; }
    static Homography translation(double dx, double dy);

    double det() const;
    Homography inverse() const;
    bool invertible(double eps = 1e-9) const { return std::abs(det()) > eps; }
};

// Exact projective map sending src[i] -> dst[i] for 4 point pairs, solved
// by direct linear transform (8x8 system) and normalized to m[2][2] = 1.
// Throws if the system is singular.
Homography solve_homography(const std::array<Point2, 4>& src, const std::array<Point2, 4>& dst);

// Dehomogenized application h * [x, y, 1]. Throws if |w| < 1e-9.
Point2 warp_point(const Homography& h, const Point2& pt);

bool is_convex_quad(const std::array<Point2, 4>& q);

struct JitterParams {
    double corner_jitter_frac = 0.15;
    int image_size = 128;
};

// Random pose: the 4 image corners are jittered independently and uniformly
// within +-corner_jitter_frac * image_size, and H maps canonical corners to
// the jittered set. Resamples non-convex or near-singular draws, up to
// max_resamples before giving up.
Homography sample_homography(Rng& rng, const JitterParams& p, int max_resamples = 100);

}  // namespace lmid
