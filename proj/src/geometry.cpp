// Copyright (C) 2026 Landmark-Id Authors
// SPDX-License-Identifier: Apache-2.0

#include "lmid/geometry.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace lmid {

Homography Homography::translation(double dx, double dy) {
    Homography h;
    h.m[0][2] = dx;
    h.m[1][2] = dy;
    return h;
}

double Homography::det() const {
    const auto& a = m;
    return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
           a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
           a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
}

Homography Homography::inverse() const {
    const double d = det();
    if (std::abs(d) < 1e-12) throw std::runtime_error("Homography::inverse: singular matrix");
    const auto& a = m;
    Homography r;
    r.m[0][0] = (a[1][1] * a[2][2] - a[1][2] * a[2][1]) / d;
    r.m[0][1] = (a[0][2] * a[2][1] - a[0][1] * a[2][2]) / d;
    r.m[0][2] = (a[0][1] * a[1][2] - a[0][2] * a[1][1]) / d;
    r.m[1][0] = (a[1][2] * a[2][0] - a[1][0] * a[2][2]) / d;
    r.m[1][1] = (a[0][0] * a[2][2] - a[0][2] * a[2][0]) / d;
    r.m[1][2] = (a[0][2] * a[1][0] - a[0][0] * a[1][2]) / d;
    r.m[2][0] = (a[1][0] * a[2][1] - a[1][1] * a[2][0]) / d;
    r.m[2][1] = (a[0][1] * a[2][0] - a[0][0] * a[2][1]) / d;
    r.m[2][2] = (a[0][0] * a[1][1] - a[0][1] * a[1][0]) / d;
    // renormalize so the last entry stays 1
    const double w = r.m[2][2];
    if (std::abs(w) < 1e-12) throw std::runtime_error("Homography::inverse: degenerate normalization");
    for (auto& row : r.m)
        for (auto& v : row) v /= w;
    return r;
}

Homography solve_homography(const std::array<Point2, 4>& src, const std::array<Point2, 4>& dst) {
    // DLT with h22 pinned to 1: two rows per correspondence.
    Eigen::Matrix<double, 8, 8> A;
    Eigen::Matrix<double, 8, 1> b;
    for (int i = 0; i < 4; ++i) {
        const double x = src[i].x, y = src[i].y;
        const double u = dst[i].x, v = dst[i].y;
        A.row(2 * i) << x, y, 1, 0, 0, 0, -u * x, -u * y;
        A.row(2 * i + 1) << 0, 0, 0, x, y, 1, -v * x, -v * y;
        b(2 * i) = u;
        b(2 * i + 1) = v;
    }
    Eigen::PartialPivLU<Eigen::Matrix<double, 8, 8>> lu(A);
    if (std::abs(lu.determinant()) < 1e-12)
        throw std::runtime_error("solve_homography: degenerate correspondences");
    Eigen::Matrix<double, 8, 1> h = lu.solve(b);
    Homography out;
    out.m = {{{h(0), h(1), h(2)}, {h(3), h(4), h(5)}, {h(6), h(7), 1.0}}};
    return out;
}

Point2 warp_point(const Homography& h, const Point2& pt) {
    const auto& a = h.m;
    const double w = a[2][0] * pt.x + a[2][1] * pt.y + a[2][2];
    if (std::abs(w) < 1e-9) throw std::runtime_error("warp_point: point maps to infinity");
    return {(a[0][0] * pt.x + a[0][1] * pt.y + a[0][2]) / w,
            (a[1][0] * pt.x + a[1][1] * pt.y + a[1][2]) / w};
}

bool is_convex_quad(const std::array<Point2, 4>& q) {
    // all successive cross products share a sign
    double sign = 0.0;
    for (int i = 0; i < 4; ++i) {
        const Point2& a = q[i];
        const Point2& b = q[(i + 1) % 4];
        const Point2& c = q[(i + 2) % 4];
        const double cross = (b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x);
        if (std::abs(cross) < 1e-12) return false;
        if (sign == 0.0)
            sign = cross;
        else if (sign * cross < 0.0)
            return false;
    }
    return true;
}

Homography sample_homography(Rng& rng, const JitterParams& p, int max_resamples) {
    const double s = static_cast<double>(p.image_size);
    const double j = p.corner_jitter_frac * s;
    const std::array<Point2, 4> canonical = {{{0, 0}, {s - 1, 0}, {s - 1, s - 1}, {0, s - 1}}};
    for (int attempt = 0; attempt <= max_resamples; ++attempt) {
        std::array<Point2, 4> jittered;
        for (int i = 0; i < 4; ++i) {
            jittered[i].x = canonical[i].x + uniform(rng, -j, j);
            jittered[i].y = canonical[i].y + uniform(rng, -j, j);
        }
        if (!is_convex_quad(jittered)) continue;
        Homography h;
        try {
            h = solve_homography(canonical, jittered);
        } catch (const std::runtime_error&) {
            continue;
        }
        if (!h.invertible()) continue;
        return h;
    }
    throw std::runtime_error("sample_homography: no valid homography after max resamples");
}

}  // namespace lmid
