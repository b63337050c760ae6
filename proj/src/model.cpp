// Copyright (C) 2026 Landmark-Id Authors
// SPDX-License-Identifier: Apache-2.0

#include "lmid/model.hpp"

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>
#include <stdexcept>

#include "lmid/digest.hpp"

using nlohmann::json;

namespace lmid {

BackboneKind backbone_from_string(const std::string& s) {
    if (s == "standard-50-layer-residual") return BackboneKind::standard_resnet50;
    if (s == "small-residual") return BackboneKind::small_residual;
    throw std::invalid_argument("unknown backbone: " + s);
}

std::string to_string(BackboneKind kind) {
    switch (kind) {
        case BackboneKind::standard_resnet50: return "standard-50-layer-residual";
        case BackboneKind::small_residual: return "small-residual";
    }
    throw std::logic_error("bad backbone kind");
}

StageTag stage_from_string(const std::string& s) {
    if (s == "1a") return StageTag::s1a;
    if (s == "1b") return StageTag::s1b;
    if (s == "2a") return StageTag::s2a;
    if (s == "2b") return StageTag::s2b;
    throw std::invalid_argument("unknown stage tag: " + s);
}

std::string to_string(StageTag tag) {
    switch (tag) {
        case StageTag::s1a: return "1a";
        case StageTag::s1b: return "1b";
        case StageTag::s2a: return "2a";
        case StageTag::s2b: return "2b";
    }
    throw std::logic_error("bad stage tag");
}

void ModelConfig::validate() const {
    if (k < 0) throw std::invalid_argument("ModelConfig: k must be >= 0");
    if (embed_dim <= 0) throw std::invalid_argument("ModelConfig: embed_dim must be > 0");
    if (n_train_classes < 1) throw std::invalid_argument("ModelConfig: n_train_classes must be >= 1");
    if (base_width < 4) throw std::invalid_argument("ModelConfig: base_width must be >= 4");
    if (pretrained && pretrained_weights.empty())
        throw std::invalid_argument("ModelConfig: pretrained requested without pretrained_weights");
}

std::string ModelConfig::to_json() const {
    json j;
    j["k"] = k;
    j["n_train_classes"] = n_train_classes;
    j["embed_dim"] = embed_dim;
    j["backbone"] = to_string(backbone);
    j["base_width"] = base_width;
    j["pretrained"] = pretrained;
    j["pretrained_weights"] = pretrained_weights;
    return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& json_text) {
    json j = json::parse(json_text);
    ModelConfig cfg;
    cfg.k = j.at("k").get<int>();
    cfg.n_train_classes = j.at("n_train_classes").get<int>();
    cfg.embed_dim = j.at("embed_dim").get<int>();
    cfg.backbone = backbone_from_string(j.at("backbone").get<std::string>());
    cfg.base_width = j.at("base_width").get<int>();
    cfg.pretrained = j.at("pretrained").get<bool>();
    cfg.pretrained_weights = j.at("pretrained_weights").get<std::string>();
    return cfg;
}

namespace {

torch::nn::Conv2d conv3x3(int in, int out, int stride) {
    return torch::nn::Conv2d(
        torch::nn::Conv2dOptions(in, out, 3).stride(stride).padding(1).bias(false));
}

torch::nn::Conv2d conv1x1(int in, int out, int stride) {
    return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 1).stride(stride).bias(false));
}

// Basic residual block as one Sequential; the projection shortcut lives in a
// parallel Sequential so forward can add them.
torch::nn::Sequential basic_block(int in, int out, int stride) {
    return torch::nn::Sequential(conv3x3(in, out, stride), torch::nn::BatchNorm2d(out),
                                 torch::nn::ReLU(), conv3x3(out, out, 1),
                                 torch::nn::BatchNorm2d(out));
}

// ResNet bottleneck with a concrete forward, so it can live inside Sequential.
struct BottleneckImpl : torch::nn::Module {
    torch::nn::Sequential main{nullptr};
    torch::nn::Sequential proj{nullptr};  // null for identity skips

    BottleneckImpl(int in, int mid, int stride, bool project) {
        main = register_module(
            "main", torch::nn::Sequential(conv1x1(in, mid, 1), torch::nn::BatchNorm2d(mid),
                                          torch::nn::ReLU(), conv3x3(mid, mid, stride),
                                          torch::nn::BatchNorm2d(mid), torch::nn::ReLU(),
                                          conv1x1(mid, mid * 4, 1),
                                          torch::nn::BatchNorm2d(mid * 4)));
        if (project)
            proj = register_module("proj",
                                   torch::nn::Sequential(conv1x1(in, mid * 4, stride),
                                                         torch::nn::BatchNorm2d(mid * 4)));
    }

    torch::Tensor forward(const torch::Tensor& x) {
        return torch::relu(main->forward(x) + (proj ? proj->forward(x) : x));
    }
};
TORCH_MODULE(Bottleneck);

void init_module_tree(torch::nn::Module& root, bool fan_in_first_conv) {
    torch::NoGradGuard no_grad;
    bool first_conv = fan_in_first_conv;
    for (auto& m : root.modules(/*include_self=*/false)) {
        if (auto* conv = m->as<torch::nn::Conv2d>()) {
            if (first_conv)
                torch::nn::init::kaiming_normal_(conv->weight, 0.0, torch::kFanIn, torch::kReLU);
            else
                torch::nn::init::kaiming_normal_(conv->weight, 0.0, torch::kFanOut, torch::kReLU);
            if (conv->options.bias()) torch::nn::init::zeros_(conv->bias);
            first_conv = false;
        } else if (auto* bn2 = m->as<torch::nn::BatchNorm2d>()) {
            torch::nn::init::ones_(bn2->weight);
            torch::nn::init::zeros_(bn2->bias);
        } else if (auto* bn1 = m->as<torch::nn::BatchNorm1d>()) {
            torch::nn::init::ones_(bn1->weight);
            torch::nn::init::zeros_(bn1->bias);
        } else if (auto* fc = m->as<torch::nn::Linear>()) {
            torch::nn::init::normal_(fc->weight, 0.0, 0.01);
            if (fc->options.bias()) torch::nn::init::zeros_(fc->bias);
        }
    }
}

}  // namespace

LandmarkIdNet::LandmarkIdNet(const ModelConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const int in_ch = 3 + cfg_.k;
    if (cfg_.backbone == BackboneKind::small_residual) {
        const int w = cfg_.base_width;
        stem_ = register_module(
            "backbone_stem", torch::nn::Sequential(conv3x3(in_ch, w, 2), torch::nn::BatchNorm2d(w),
                                                   torch::nn::ReLU()));
        const int widths[4] = {2 * w, 4 * w, 8 * w, 8 * w};
        int in = w;
        for (int i = 0; i < 4; ++i) {
            blocks_.push_back(register_module("backbone_block" + std::to_string(i + 1),
                                              basic_block(in, widths[i], 2)));
            shortcuts_.push_back(register_module(
                "backbone_shortcut" + std::to_string(i + 1),
                torch::nn::Sequential(conv1x1(in, widths[i], 2), torch::nn::BatchNorm2d(widths[i]))));
            in = widths[i];
        }
        feature_dim_ = in;
    } else {
        conv1_ = register_module("backbone_conv1",
                                 torch::nn::Conv2d(torch::nn::Conv2dOptions(in_ch, 64, 7)
                                                       .stride(2)
                                                       .padding(3)
                                                       .bias(false)));
        bn1_ = register_module("backbone_bn1", torch::nn::BatchNorm2d(64));
        auto make_layer = [&](int in, int mid, int blocks, int stride) {
            torch::nn::Sequential layer;
            layer->push_back(Bottleneck(in, mid, stride, true));
            for (int b = 1; b < blocks; ++b) layer->push_back(Bottleneck(mid * 4, mid, 1, false));
            return layer;
        };
        layer1_ = register_module("backbone_layer1", make_layer(64, 64, 3, 1));
        layer2_ = register_module("backbone_layer2", make_layer(256, 128, 4, 2));
        layer3_ = register_module("backbone_layer3", make_layer(512, 256, 6, 2));
        layer4_ = register_module("backbone_layer4", make_layer(1024, 512, 3, 2));
        feature_dim_ = 2048;
    }

    embed_fc_ = register_module("embed_fc", torch::nn::Linear(feature_dim_, cfg_.embed_dim));
    neck_ = register_module("neck", torch::nn::BatchNorm1d(cfg_.embed_dim));
    classifier_ = register_module(
        "classifier",
        torch::nn::Linear(torch::nn::LinearOptions(cfg_.embed_dim, cfg_.n_train_classes).bias(false)));
}

void LandmarkIdNet::attach_decoder() {
    if (cfg_.k <= 0) throw std::logic_error("attach_decoder: k must be > 0");
    if (decoder_) throw std::logic_error("attach_decoder: decoder already attached");
    using namespace torch::nn;
    auto up = []() {
        return Upsample(UpsampleOptions().scale_factor(std::vector<double>{2.0, 2.0}).mode(torch::kBilinear).align_corners(false));
    };
    // 256 -> 128 x 8 x 8 seed, then 8 -> 16 -> 32 -> 64
    decoder_ = register_module(
        "decoder",
        Sequential(Linear(cfg_.embed_dim, 128 * 8 * 8),
                   Functional([](torch::Tensor x) { return x.view({-1, 128, 8, 8}); }), up(),
                   conv3x3(128, 64, 1), BatchNorm2d(64), ReLU(), up(), conv3x3(64, 32, 1),
                   BatchNorm2d(32), ReLU(), up(), conv3x3(32, 16, 1), BatchNorm2d(16), ReLU(),
                   Conv2d(Conv2dOptions(16, cfg_.k, 3).padding(1)), Sigmoid()));
    init_module_tree(*decoder_, /*fan_in_first_conv=*/false);
}

torch::Tensor LandmarkIdNet::backbone_forward(const torch::Tensor& x) {
    if (cfg_.backbone == BackboneKind::small_residual) {
        auto h = stem_->forward(x);
        for (size_t i = 0; i < blocks_.size(); ++i)
            h = torch::relu(blocks_[i]->forward(h) + shortcuts_[i]->forward(h));
        return h;
    }
    auto h = torch::relu(bn1_(conv1_(x)));
    h = torch::max_pool2d(h, 3, 2, 1);
    h = layer1_->forward(h);
    h = layer2_->forward(h);
    h = layer3_->forward(h);
    h = layer4_->forward(h);
    return h;
}

ModelOutput LandmarkIdNet::forward(const torch::Tensor& input) {
    TORCH_CHECK(input.dim() == 4, "forward: expected B x C x H x W input");
    TORCH_CHECK(input.size(1) == input_channels(), "forward: channel-count mismatch, expected ",
                input_channels(), " (3 + k) channels, got ", input.size(1));
    TORCH_CHECK(input.size(2) % 32 == 0 && input.size(3) % 32 == 0,
                "forward: H and W must be divisible by 32");

    const auto feats = backbone_forward(input);
    const auto pooled = torch::adaptive_avg_pool2d(feats, {1, 1}).flatten(1);

    ModelOutput out;
    out.embedding = embed_fc_(pooled);
    out.logits = classifier_(neck_(out.embedding));
    if (decoder_)
        out.recon = decoder_->forward(out.embedding);
    else
        out.recon = torch::zeros({input.size(0), 0, 64, 64}, input.options());
    return out;
}

namespace {



bool is_first_conv_name(const std::string& name) {
    return name.rfind("backbone_stem.0.", 0) == 0 || name.rfind("backbone_conv1.", 0) == 0;
}

bool is_backbone_name(const std::string& name) { return name.rfind("backbone_", 0) == 0; }

}  // namespace

Model init_parameters(const ModelConfig& cfg, InitReport* report) {
    auto net = std::make_shared<LandmarkIdNet>(cfg);
    init_module_tree(*net, /*fan_in_first_conv=*/true);

    InitReport local;
    for (const auto& p : net->named_parameters()) local.random.push_back(p.key());

    if (cfg.pretrained) {
        if (!std::filesystem::exists(cfg.pretrained_weights))
            throw std::runtime_error("init_parameters: pretrained weights unavailable: " +
                                     cfg.pretrained_weights);
        const auto donor = load_named_tensors(cfg.pretrained_weights);
        std::map<std::string, torch::Tensor> donor_map(donor.begin(), donor.end());

        torch::NoGradGuard no_grad;
        local.random.clear();
        int copied = 0;
        auto copy_from_donor = [&](const std::string& name, torch::Tensor value) {
            auto found = donor_map.find(name);
            if (is_backbone_name(name) && !is_first_conv_name(name) && found != donor_map.end() &&
                found->second.sizes() == value.sizes()) {
                value.copy_(found->second);
                local.pretrained.push_back(name);
                ++copied;
            } else {
                local.random.push_back(name);
            }
        };
        for (const auto& p : net->named_parameters()) copy_from_donor(p.key(), p.value());
        for (const auto& b : net->named_buffers()) copy_from_donor(b.key(), b.value());
        if (copied == 0)
            throw std::runtime_error(
                "init_parameters: donor archive does not cover the backbone: " +
                cfg.pretrained_weights);
    }
    if (report) *report = std::move(local);
    return net;
}

ParameterGroups parameter_groups(const LandmarkIdNet& model, StageTag stage) {
    ParameterGroups groups;
    for (const auto& p : model.named_parameters()) {
        const std::string& name = p.key();
        bool trainable = false;
        switch (stage) {
            case StageTag::s1a:
                trainable = is_first_conv_name(name) || name.rfind("classifier.", 0) == 0;
                break;
            case StageTag::s1b: trainable = name.rfind("decoder.", 0) != 0; break;
            case StageTag::s2a: trainable = name.rfind("decoder.", 0) == 0; break;
            case StageTag::s2b: trainable = true; break;
        }
        (trainable ? groups.trainable : groups.frozen).push_back(name);
    }
    return groups;
}

void apply_parameter_groups(LandmarkIdNet& model, const ParameterGroups& groups) {
    const std::set<std::string> trainable(groups.trainable.begin(), groups.trainable.end());
    for (auto& p : model.named_parameters())
        p.value().set_requires_grad(trainable.count(p.key()) > 0);

    // normalization modules with no trainable parameter keep their running
    // statistics fixed
    model.train();
    for (const auto& m : model.named_modules("", false)) {
        auto* impl = m.value().get();
        const bool is_norm = impl->as<torch::nn::BatchNorm2d>() || impl->as<torch::nn::BatchNorm1d>();
        if (!is_norm) continue;
        bool any_trainable = false;
        for (const auto& p : impl->named_parameters())
            if (trainable.count(m.key() + "." + p.key())) any_trainable = true;
        if (!any_trainable) impl->eval();
    }
}

std::uint64_t parameters_digest(const LandmarkIdNet& model, const std::vector<std::string>& names) {
    std::vector<std::string> sorted = names;
    std::sort(sorted.begin(), sorted.end());
    auto params = const_cast<LandmarkIdNet&>(model).named_parameters();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const std::string& name : sorted) {
        h = fnv1a64(name, h);
        const auto t = params[name].detach().contiguous();
        h = fnv1a64(std::string_view(static_cast<const char*>(t.const_data_ptr()),
                                     t.numel() * t.element_size()),
                    h);
    }
    return h;
}

std::uint64_t parameters_digest(const LandmarkIdNet& model) {
    std::vector<std::string> names;
    for (const auto& p : const_cast<LandmarkIdNet&>(model).named_parameters())
        names.push_back(p.key());
    return parameters_digest(model, names);
}

void save_named_tensors(const std::string& path,
                        const std::vector<std::pair<std::string, torch::Tensor>>& tensors) {
    torch::serialize::OutputArchive archive;
    std::vector<std::string> names;
    for (const auto& [name, tensor] : tensors) {
        names.push_back(name);
        archive.write("tensor/" + name, tensor);
    }
    std::string joined;
    for (const std::string& n : names) joined += n + "\n";
    archive.write("names", c10::IValue(joined));
    archive.save_to(path);
}

std::vector<std::pair<std::string, torch::Tensor>> load_named_tensors(const std::string& path) {
    torch::serialize::InputArchive archive;
    archive.load_from(path);
    c10::IValue names_iv;
    archive.read("names", names_iv);
    std::vector<std::pair<std::string, torch::Tensor>> out;
    std::istringstream names(names_iv.toStringRef());
    std::string name;
    while (std::getline(names, name)) {
        if (name.empty()) continue;
        torch::Tensor t;
        archive.read("tensor/" + name, t);
        out.emplace_back(name, t);
    }
    return out;
}

}  // namespace lmid
