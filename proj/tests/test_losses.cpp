// Copyright (C) 2026 Landmark-Id Authors
// SPDX-License-Identifier: Apache-2.0

#include "lmid/losses.hpp"

// torch's logging defines CHECK; include doctest after so its macros win
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

using namespace lmid;

namespace {

// Central finite differences of a scalar-valued function of one tensor.
torch::Tensor numeric_grad(const std::function<torch::Tensor(const torch::Tensor&)>& f,
                           torch::Tensor x, double h = 1e-6) {
    auto grad = torch::zeros_like(x);
    auto flat = x.flatten();
    auto gflat = grad.flatten();
    for (int64_t i = 0; i < flat.numel(); ++i) {
        const double orig = flat[i].item<double>();
        flat[i] = orig + h;
        const double up = f(x).item<double>();
        flat[i] = orig - h;
        const double down = f(x).item<double>();
        flat[i] = orig;
        gflat[i] = (up - down) / (2 * h);
    }
    return grad;
}

void check_gradients(const std::function<torch::Tensor(const torch::Tensor&)>& f,
                     torch::Tensor x, double tol = 1e-4) {
    auto input = x.clone().set_requires_grad(true);
    auto loss = f(input);
    loss.backward();
    const auto analytic = input.grad();
    const auto numeric = numeric_grad(f, x.clone());
    const double denom = std::max(1e-8, numeric.abs().max().item<double>());
    const double err = (analytic - numeric).abs().max().item<double>() / denom;
    CHECK(err < tol);
}

}  // namespace

TEST_CASE("id_loss vanishes for confident correct predictions with eps=0") {
    auto logits = torch::zeros({2, 4}, torch::kFloat64);
    logits[0][1] = 50.0;
    logits[1][3] = 50.0;
    const auto labels = torch::tensor({1, 3});
    CHECK(id_loss(logits, labels, 0.0).item<double>() < 1e-12);
}

TEST_CASE("id_loss on uniform logits is ln C for any eps") {
    for (int classes : {3, 7}) {
        auto logits = torch::full({5, classes}, 1.23, torch::kFloat64);
        const auto labels = torch::randint(0, classes, {5});
        for (double eps : {0.0, 0.1, 0.4}) {
            CHECK(id_loss(logits, labels, eps).item<double>() ==
                  doctest::Approx(std::log(classes)).epsilon(1e-12));
        }
    }
}

TEST_CASE("id_loss matches a per-term summation oracle on a 3-class hand case") {
    auto logits = torch::tensor({{1.0, -0.5, 0.25}, {0.0, 2.0, -1.0}}, torch::kFloat64);
    const auto labels = torch::tensor({0, 2});
    const double eps = 0.1;

    double expected = 0.0;
    for (int b = 0; b < 2; ++b) {
        double denom = 0.0;
        for (int c = 0; c < 3; ++c) denom += std::exp(logits[b][c].item<double>());
        for (int c = 0; c < 3; ++c) {
            const double target = c == labels[b].item<int64_t>() ? 1.0 - eps : eps / 2.0;
            const double logp = logits[b][c].item<double>() - std::log(denom);
            expected -= target * logp;
        }
    }
    expected /= 2.0;
    CHECK(id_loss(logits, labels, eps).item<double>() == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("id_loss never drops below the smoothed-target entropy floor") {
    torch::manual_seed(0);
    const int classes = 6;
    const double eps = 0.1;
    const double floor = -((1 - eps) * std::log(1 - eps) +
                           eps * std::log(eps / (classes - 1)));
    for (int trial = 0; trial < 20; ++trial) {
        const auto logits = torch::randn({8, classes}, torch::kFloat64) * 3.0;
        const auto labels = torch::randint(0, classes, {8});
        CHECK(id_loss(logits, labels, eps).item<double>() >= floor - 1e-9);
    }
}

TEST_CASE("triplet loss is zero for well-separated clusters and margin for collapsed ones") {
    auto emb = torch::tensor({{0.0, 0.0}, {0.1, 0.0}, {100.0, 0.0}, {100.1, 0.0}},
                             torch::kFloat64);
    const auto labels = torch::tensor({0, 0, 1, 1});
    CHECK(triplet_loss(emb, labels, 0.3).item<double>() == doctest::Approx(0.0).scale(1.0));

    auto same = torch::ones({4, 2}, torch::kFloat64);
    CHECK(triplet_loss(same, labels, 0.3).item<double>() == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("triplet loss equals the brute-force pair enumeration oracle") {
    torch::manual_seed(3);
    for (int trial = 0; trial < 10; ++trial) {
        const auto emb = torch::randn({8, 5}, torch::kFloat64);
        const auto labels = torch::tensor({0, 0, 1, 1, 2, 2, 3, 3});
        const double margin = 0.4;

        double expected = 0.0;
        for (int a = 0; a < 8; ++a) {
            double hardest_pos = 0.0;
            double hardest_neg = std::numeric_limits<double>::infinity();
            for (int j = 0; j < 8; ++j) {
                if (j == a) continue;
                const double d = (emb[a] - emb[j]).norm().item<double>();
                if (labels[j].item<int64_t>() == labels[a].item<int64_t>())
                    hardest_pos = std::max(hardest_pos, d);
                else
                    hardest_neg = std::min(hardest_neg, d);
            }
            expected += std::max(0.0, hardest_pos - hardest_neg + margin);
        }
        expected /= 8.0;
        CHECK(triplet_loss(emb, labels, margin).item<double>() ==
              doctest::Approx(expected).epsilon(1e-10));
    }
}

TEST_CASE("triplet loss is invariant to batch permutation") {
    torch::manual_seed(5);
    const auto emb = torch::randn({8, 4}, torch::kFloat64);
    const auto labels = torch::tensor({0, 0, 1, 1, 2, 2, 3, 3});
    const auto perm = torch::randperm(8);
    const double a = triplet_loss(emb, labels, 0.3).item<double>();
    const double b = triplet_loss(emb.index_select(0, perm), labels.index_select(0, perm), 0.3)
                         .item<double>();
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
}

TEST_CASE("triplet loss rejects anchors without a positive or a negative") {
    const auto emb = torch::randn({3, 4}, torch::kFloat64);
    CHECK_THROWS(triplet_loss(emb, torch::tensor({0, 1, 2}), 0.3));  // no positives
    CHECK_THROWS(triplet_loss(emb, torch::tensor({0, 0, 0}), 0.3));  // no negatives
}

TEST_CASE("center loss is zero at the centers and d^2/2 at distance d") {
    CenterState state(3, 4, 0.5, torch::kFloat64);
    state.centers() = torch::randn({3, 4}, torch::kFloat64);
    const auto labels = torch::tensor({0, 2});
    const auto at_centers = state.centers().index_select(0, labels);
    CHECK(state.loss(at_centers, labels).item<double>() == doctest::Approx(0.0).scale(1.0));

    const auto before = state.centers().clone();
    state.update(at_centers, labels);
    CHECK((state.centers() - before).abs().max().item<double>() == 0.0);

    auto off = at_centers.clone();
    off[0][0] += 3.0;  // distance 3 for the first sample, 0 for the second
    CHECK(state.loss(off, labels).item<double>() == doctest::Approx(9.0 / 2.0 / 2.0).epsilon(1e-12));
}

TEST_CASE("center loss matches the per-sample loop oracle and update moves toward means") {
    torch::manual_seed(11);
    CenterState state(4, 6, 0.5, torch::kFloat64);
    state.centers() = torch::randn({4, 6}, torch::kFloat64);
    const auto emb = torch::randn({8, 6}, torch::kFloat64);
    const auto labels = torch::tensor({0, 0, 1, 1, 2, 2, 3, 3});

    double expected = 0.0;
    for (int i = 0; i < 8; ++i)
        expected += 0.5 * (emb[i] - state.centers()[labels[i].item<int64_t>()])
                              .pow(2)
                              .sum()
                              .item<double>();
    expected /= 8.0;
    CHECK(state.loss(emb, labels).item<double>() == doctest::Approx(expected).epsilon(1e-10));

    // classic decoupled rule: c -= lr * sum(c - x) / (1 + count)
    const auto before = state.centers().clone();
    state.update(emb, labels);
    for (int cls = 0; cls < 4; ++cls) {
        const auto members = emb.slice(0, cls * 2, cls * 2 + 2);
        const auto delta = (before[cls].unsqueeze(0) - members).sum(0) / (1.0 + 2.0);
        const auto expected_center = before[cls] - 0.5 * delta;
        CHECK((state.centers()[cls] - expected_center).abs().max().item<double>() < 1e-12);
    }
}

TEST_CASE("recon loss equals the closed form on a two-level grid") {
    auto recon = torch::full({1, 2, 4, 4}, 0.0, torch::kFloat64);
    auto target = torch::zeros({1, 2, 4, 4}, torch::kFloat64);
    // half the pixels bright, half dark, recon matching at 0.99 / 0.01
    for (int c = 0; c < 2; ++c)
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x) {
                const bool bright = (x + y + c) % 2 == 0;
                target[0][c][y][x] = bright ? 1.0 : 0.0;
                recon[0][c][y][x] = bright ? 0.99 : 0.01;
            }
    const double expected = -std::log(0.99);  // every term is -ln(0.99)
    CHECK(recon_loss(recon, target).item<double>() == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("recon loss goes to zero as recon approaches an all-zero target") {
    const auto target = torch::zeros({1, 1, 8, 8}, torch::kFloat64);
    const auto recon = torch::full({1, 1, 8, 8}, 1e-9, torch::kFloat64);
    CHECK(recon_loss(recon, target).item<double>() < 1e-8);
}

TEST_CASE("recon loss matches the elementwise oracle on a random 4x4 case") {
    torch::manual_seed(13);
    const auto recon = torch::rand({1, 1, 4, 4}, torch::kFloat64) * 0.98 + 0.01;
    const auto target = torch::rand({1, 1, 4, 4}, torch::kFloat64);
    double expected = 0.0;
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) {
            const double t = target[0][0][y][x].item<double>();
            const double r = recon[0][0][y][x].item<double>();
            expected += -(t * std::log(r) + (1 - t) * std::log(1 - r));
        }
    expected /= 16.0;
    CHECK(recon_loss(recon, target).item<double>() == doctest::Approx(expected).epsilon(1e-10));
    CHECK_THROWS(recon_loss(recon, torch::zeros({1, 1, 8, 8}, torch::kFloat64)));
}

TEST_CASE("total loss combines the paper coefficients exactly") {
    LossWeights w;  // alpha 1, beta 0.0005
    auto one = torch::tensor(1.0, torch::kFloat64);
    LossParts parts{one, one, one, one};
    CHECK(total_loss(parts, w).item<double>() == doctest::Approx(3.0005).epsilon(1e-12));

    auto zero = torch::tensor(0.0, torch::kFloat64);
    CHECK(total_loss({zero, zero, zero, zero}, w).item<double>() == 0.0);

    // alpha = 0 reduces to the baseline combination
    LossWeights base = w;
    base.alpha = 0.0;
    CHECK(total_loss(parts, base).item<double>() == doctest::Approx(2.0005).epsilon(1e-12));
    LossParts no_hr{one, one, one, std::nullopt};
    CHECK(total_loss(no_hr, w).item<double>() == doctest::Approx(2.0005).epsilon(1e-12));
}

TEST_CASE("total loss is linear in each part") {
    LossWeights w;
    auto one = torch::tensor(1.0, torch::kFloat64);
    const double base = total_loss({one, one, one, one}, w).item<double>();
    auto vary = [&](int slot, double v) {
        auto t = torch::tensor(v, torch::kFloat64);
        LossParts parts{one, one, one, one};
        if (slot == 0) parts.id = t;
        if (slot == 1) parts.triplet = t;
        if (slot == 2) parts.center = t;
        if (slot == 3) parts.hr = t;
        return total_loss(parts, w).item<double>();
    };
    const double coeffs[4] = {1.0, 1.0, w.beta, w.alpha};
    for (int slot = 0; slot < 4; ++slot)
        CHECK(vary(slot, 3.0) - base == doctest::Approx(2.0 * coeffs[slot]).epsilon(1e-9));
}

TEST_CASE("total loss names the offending non-finite term") {
    LossWeights w;
    auto one = torch::tensor(1.0, torch::kFloat64);
    auto bad = torch::tensor(std::numeric_limits<double>::quiet_NaN(), torch::kFloat64);
    CHECK_THROWS_WITH_AS(total_loss({one, bad, one, one}, w), doctest::Contains("Triplet"),
                         std::runtime_error);
    CHECK_THROWS_WITH_AS(total_loss({one, one, one, bad}, w), doctest::Contains("HR"),
                         std::runtime_error);
}

TEST_CASE("losses are non-negative on random inputs") {
    torch::manual_seed(17);
    for (int trial = 0; trial < 10; ++trial) {
        const auto logits = torch::randn({6, 5}, torch::kFloat64);
        const auto labels = torch::tensor({0, 0, 1, 1, 2, 2});
        const auto emb = torch::randn({6, 4}, torch::kFloat64);
        CHECK(id_loss(logits, labels, 0.1).item<double>() >= 0.0);
        CHECK(triplet_loss(emb, labels, 0.3).item<double>() >= 0.0);
        CenterState state(3, 4, 0.5, torch::kFloat64);
        CHECK(state.loss(emb, labels).item<double>() >= 0.0);
        const auto recon = torch::rand({1, 2, 4, 4}, torch::kFloat64) * 0.9 + 0.05;
        const auto target = torch::rand({1, 2, 4, 4}, torch::kFloat64);
        CHECK(recon_loss(recon, target).item<double>() >= 0.0);
    }
}

TEST_CASE("loss gradients match central finite differences") {
    torch::manual_seed(23);
    const auto labels = torch::tensor({0, 0, 1, 1, 2, 2});

    check_gradients(
        [&](const torch::Tensor& x) { return id_loss(x, labels, 0.1); },
        torch::randn({6, 5}, torch::kFloat64));

    check_gradients(
        [&](const torch::Tensor& x) { return triplet_loss(x, labels, 0.5); },
        torch::randn({6, 4}, torch::kFloat64));

    CenterState state(3, 4, 0.5, torch::kFloat64);
    state.centers() = torch::randn({3, 4}, torch::kFloat64);
    check_gradients(
        [&](const torch::Tensor& x) { return state.loss(x, labels); },
        torch::randn({6, 4}, torch::kFloat64));

    const auto target = torch::rand({1, 2, 4, 4}, torch::kFloat64);
    check_gradients(
        [&](const torch::Tensor& x) { return recon_loss(torch::sigmoid(x), target); },
        torch::randn({1, 2, 4, 4}, torch::kFloat64));
}
