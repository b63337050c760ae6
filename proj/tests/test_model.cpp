// Copyright (C) 2026 Landmark-Id Authors
// SPDX-License-Identifier: Apache-2.0

#include "lmid/model.hpp"
#include "lmid/rng.hpp"

// torch's logging defines CHECK; include doctest after so its macros win
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <set>

namespace fs = std::filesystem;
using namespace lmid;

namespace {

ModelConfig tiny_config(int k = 3, int classes = 10) {
    ModelConfig cfg;
    cfg.k = k;
    cfg.n_train_classes = classes;
    cfg.base_width = 8;
    return cfg;
}

}  // namespace

TEST_CASE("forward shape contract: embedding, logits and recon") {
    torch::manual_seed(1);
    ModelConfig cfg = tiny_config(3, 10);
    Model model = init_parameters(cfg);
    model->attach_decoder();
    model->eval();
    const auto out = model->forward(torch::rand({2, 6, 128, 128}));
    CHECK(out.embedding.sizes() == torch::IntArrayRef({2, 256}));
    CHECK(out.logits.sizes() == torch::IntArrayRef({2, 10}));
    CHECK(out.recon.sizes() == torch::IntArrayRef({2, 3, 64, 64}));
    // sigmoid output lives in the open unit interval
    CHECK(out.recon.min().item<float>() > 0.0f);
    CHECK(out.recon.max().item<float>() < 1.0f);
}

TEST_CASE("output shape holds for any input size divisible by 32") {
    torch::manual_seed(2);
    Model model = init_parameters(tiny_config(2, 5));
    model->attach_decoder();
    model->eval();
    for (int size : {32, 64, 96}) {
        const auto out = model->forward(torch::rand({1, 5, size, size}));
        CHECK(out.embedding.sizes() == torch::IntArrayRef({1, 256}));
        CHECK(out.recon.sizes() == torch::IntArrayRef({1, 2, 64, 64}));
    }
    CHECK_THROWS(model->forward(torch::rand({1, 5, 48, 48})));
}

TEST_CASE("k=0 degenerates to the 3-channel baseline with empty recon") {
    torch::manual_seed(3);
    Model model = init_parameters(tiny_config(0, 10));
    CHECK(model->input_channels() == 3);
    CHECK_THROWS(model->attach_decoder());
    model->eval();
    const auto out = model->forward(torch::rand({2, 3, 64, 64}));
    CHECK(out.recon.sizes() == torch::IntArrayRef({2, 0, 64, 64}));
    CHECK(out.logits.sizes() == torch::IntArrayRef({2, 10}));
}

TEST_CASE("channel-count mismatch is rejected") {
    torch::manual_seed(4);
    Model model = init_parameters(tiny_config(3, 10));
    CHECK_THROWS_WITH_AS(model->forward(torch::rand({1, 4, 64, 64})),
                         doctest::Contains("channel-count mismatch"), c10::Error);
}

TEST_CASE("two inits under one seed produce identical parameter digests") {
    torch::manual_seed(77);
    Model a = init_parameters(tiny_config());
    torch::manual_seed(77);
    Model b = init_parameters(tiny_config());
    CHECK(parameters_digest(*a) == parameters_digest(*b));

    torch::manual_seed(78);
    Model c = init_parameters(tiny_config());
    CHECK(parameters_digest(*a) != parameters_digest(*c));
}

TEST_CASE("resnet50 backbone pools to a 2048-wide feature vector") {
    torch::manual_seed(5);
    ModelConfig cfg;
    cfg.k = 2;
    cfg.n_train_classes = 4;
    cfg.backbone = BackboneKind::standard_resnet50;
    Model model = init_parameters(cfg);
    auto params = model->named_parameters();
    CHECK(params["embed_fc.weight"].sizes() == torch::IntArrayRef({256, 2048}));
    model->eval();
    const auto out = model->forward(torch::rand({1, 5, 32, 32}));
    CHECK(out.embedding.sizes() == torch::IntArrayRef({1, 256}));
}

TEST_CASE("pretrained init copies every backbone tensor except the first conv") {
    const std::string donor_path = (fs::temp_directory_path() / "lmid-donor.pt").string();
    torch::manual_seed(11);
    Model donor = init_parameters(tiny_config(0, 10));  // 3-channel donor
    std::vector<std::pair<std::string, torch::Tensor>> tensors;
    for (const auto& p : donor->named_parameters()) tensors.emplace_back(p.key(), p.value());
    for (const auto& b : donor->named_buffers()) tensors.emplace_back(b.key(), b.value());
    save_named_tensors(donor_path, tensors);

    ModelConfig cfg = tiny_config(3, 10);
    cfg.pretrained = true;
    cfg.pretrained_weights = donor_path;
    torch::manual_seed(12);
    InitReport report;
    Model model = init_parameters(cfg, &report);

    const std::set<std::string> pretrained(report.pretrained.begin(), report.pretrained.end());
    const std::set<std::string> random(report.random.begin(), report.random.end());
    CHECK(!pretrained.count("backbone_stem.0.weight"));  // 6-channel first conv stays random
    CHECK(random.count("backbone_stem.0.weight"));
    CHECK(pretrained.count("backbone_block1.0.weight"));
    CHECK(random.count("classifier.weight"));
    CHECK(random.count("embed_fc.weight"));

    auto donor_params = donor->named_parameters();
    auto model_params = model->named_parameters();
    for (const std::string& name : report.pretrained) {
        if (!donor_params.contains(name)) continue;  // buffer names live elsewhere
        CHECK(torch::equal(model_params[name], donor_params[name]));
    }
    CHECK(!torch::equal(model_params["backbone_stem.0.weight"].slice(1, 0, 3),
                        donor_params["backbone_stem.0.weight"]));
    fs::remove(donor_path);
}

TEST_CASE("pretrained init fails without weights or with a non-covering donor") {
    ModelConfig cfg = tiny_config();
    cfg.pretrained = true;
    cfg.pretrained_weights = "/nonexistent/weights.pt";
    CHECK_THROWS_WITH_AS(init_parameters(cfg), doctest::Contains("unavailable"),
                         std::runtime_error);

    const std::string junk_path = (fs::temp_directory_path() / "lmid-junk-donor.pt").string();
    save_named_tensors(junk_path, {{"unrelated.weight", torch::ones({2, 2})}});
    cfg.pretrained_weights = junk_path;
    CHECK_THROWS_WITH_AS(init_parameters(cfg), doctest::Contains("does not cover"),
                         std::runtime_error);
    fs::remove(junk_path);
}

TEST_CASE("parameter groups partition the parameter set at every stage") {
    torch::manual_seed(6);
    Model model = init_parameters(tiny_config());
    model->attach_decoder();
    std::set<std::string> all;
    for (const auto& p : model->named_parameters()) all.insert(p.key());

    for (StageTag stage : {StageTag::s1a, StageTag::s1b, StageTag::s2a, StageTag::s2b}) {
        const ParameterGroups groups = parameter_groups(*model, stage);
        std::set<std::string> seen;
        for (const std::string& n : groups.trainable) CHECK(seen.insert(n).second);
        for (const std::string& n : groups.frozen) CHECK(seen.insert(n).second);
        CHECK(seen == all);
    }
}

TEST_CASE("stage 1a trains only the first conv and classifier") {
    torch::manual_seed(7);
    Model model = init_parameters(tiny_config());
    const ParameterGroups groups = parameter_groups(*model, StageTag::s1a);
    const std::set<std::string> trainable(groups.trainable.begin(), groups.trainable.end());
    CHECK(!trainable.empty());
    for (const std::string& name : trainable) {
        const bool ok = name.rfind("backbone_stem.0.", 0) == 0 || name.rfind("classifier.", 0) == 0;
        CHECK(ok);
    }
    for (const std::string& name : groups.frozen) {
        CHECK(name.rfind("classifier.", 0) != 0);
        if (name.rfind("backbone_", 0) == 0) CHECK(name.rfind("backbone_stem.0.", 0) != 0);
    }
}

TEST_CASE("stage 2a trains the decoder only; stage 2b freezes nothing") {
    torch::manual_seed(8);
    Model model = init_parameters(tiny_config());
    model->attach_decoder();
    const ParameterGroups s2a = parameter_groups(*model, StageTag::s2a);
    for (const std::string& name : s2a.trainable) CHECK(name.rfind("decoder.", 0) == 0);
    for (const std::string& name : s2a.frozen) CHECK(name.rfind("decoder.", 0) != 0);
    CHECK(!s2a.trainable.empty());

    const ParameterGroups s2b = parameter_groups(*model, StageTag::s2b);
    CHECK(s2b.frozen.empty());

    // stage 1b excludes the decoder from training
    const ParameterGroups s1b = parameter_groups(*model, StageTag::s1b);
    for (const std::string& name : s1b.trainable) CHECK(name.rfind("decoder.", 0) != 0);
}

TEST_CASE("apply_parameter_groups leaves frozen batchnorm stats fixed") {
    torch::manual_seed(9);
    Model model = init_parameters(tiny_config());
    model->attach_decoder();
    apply_parameter_groups(*model, parameter_groups(*model, StageTag::s2a));

    auto before = model->named_buffers()["backbone_block1.1.running_mean"].clone();
    for (int i = 0; i < 3; ++i) model->forward(torch::rand({4, 6, 32, 32}));
    auto after = model->named_buffers()["backbone_block1.1.running_mean"];
    CHECK(torch::equal(before, after));

    // decoder batchnorm stats do update in 2a
    auto dec_before = model->named_buffers()["decoder.4.running_mean"].clone();
    model->forward(torch::rand({4, 6, 32, 32}));
    auto dec_after = model->named_buffers()["decoder.4.running_mean"];
    CHECK(!torch::equal(dec_before, dec_after));
}

TEST_CASE("permuting a batch permutes all outputs identically in eval mode") {
    torch::manual_seed(10);
    Model model = init_parameters(tiny_config(2, 6));
    model->attach_decoder();
    model->eval();
    const auto input = torch::rand({5, 5, 64, 64});
    const auto perm = torch::tensor({3, 0, 4, 1, 2});
    const auto direct = model->forward(input.index_select(0, perm));
    const auto full = model->forward(input);
    CHECK(torch::allclose(direct.embedding, full.embedding.index_select(0, perm), 1e-6, 1e-6));
    CHECK(torch::allclose(direct.logits, full.logits.index_select(0, perm), 1e-6, 1e-6));
    CHECK(torch::allclose(direct.recon, full.recon.index_select(0, perm), 1e-6, 1e-6));
}

TEST_CASE("zeroed heatmap channels still produce finite outputs") {
    torch::manual_seed(14);
    Model model = init_parameters(tiny_config(3, 6));
    model->attach_decoder();
    model->eval();
    auto input = torch::rand({2, 6, 64, 64});
    input.slice(1, 3, 6).zero_();
    const auto out = model->forward(input);
    CHECK(torch::isfinite(out.embedding).all().item<bool>());
    CHECK(torch::isfinite(out.logits).all().item<bool>());
    CHECK(torch::isfinite(out.recon).all().item<bool>());
}

TEST_CASE("input-pixel gradients match central finite differences") {
    torch::manual_seed(15);
    ModelConfig cfg = tiny_config(1, 4);
    cfg.base_width = 4;
    Model model = init_parameters(cfg);
    model->attach_decoder();
    model->to(torch::kFloat64);
    model->eval();

    const auto probe = torch::randn({256}, torch::kFloat64);
    auto scalar_of = [&](const torch::Tensor& x) {
        const auto out = model->forward(x);
        return (out.embedding[0] * probe).sum() + out.recon.sum() * 0.01;
    };

    auto x = torch::rand({1, 4, 32, 32}, torch::kFloat64);
    auto x_grad = x.clone().set_requires_grad(true);
    scalar_of(x_grad).backward();
    const auto analytic = x_grad.grad();

    Rng rng(99);
    const double h = 1e-5;
    for (int probe_idx = 0; probe_idx < 6; ++probe_idx) {
        const int c = uniform_int(rng, 0, 3);
        const int y = uniform_int(rng, 0, 31);
        const int xx = uniform_int(rng, 0, 31);
        auto plus = x.clone();
        plus[0][c][y][xx] += h;
        auto minus = x.clone();
        minus[0][c][y][xx] -= h;
        const double numeric =
            (scalar_of(plus).item<double>() - scalar_of(minus).item<double>()) / (2 * h);
        const double got = analytic[0][c][y][xx].item<double>();
        const double denom = std::max({std::abs(numeric), std::abs(got), 1e-6});
        CHECK(std::abs(got - numeric) / denom < 1e-3);
    }
}

TEST_CASE("named tensor archives round trip") {
    const std::string path = (fs::temp_directory_path() / "lmid-tensors.pt").string();
    torch::manual_seed(16);
    const auto a = torch::randn({3, 4});
    const auto b = torch::randn({7});
    save_named_tensors(path, {{"alpha", a}, {"beta.gamma", b}});
    const auto loaded = load_named_tensors(path);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].first == "alpha");
    CHECK(torch::equal(loaded[0].second, a));
    CHECK(loaded[1].first == "beta.gamma");
    CHECK(torch::equal(loaded[1].second, b));
    fs::remove(path);
}
