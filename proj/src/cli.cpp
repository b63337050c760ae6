// Copyright (C) 2026 Landmark-Id Authors
// SPDX-License-Identifier: Apache-2.0

#include "lmid/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <opencv2/imgcodecs.hpp>

#include <filesystem>
#include <iostream>
#include <optional>

#include "lmid/config.hpp"
#include "lmid/evalkit.hpp"
#include "lmid/provenance.hpp"
#include "lmid/synthgen.hpp"
#include "lmid/trainer.hpp"

namespace fs = std::filesystem;

namespace lmid {

namespace {

RunConfig load_config_or_default(const std::string& path, std::optional<std::uint64_t> seed,
                                 const std::string& out) {
    RunConfig cfg = path.empty() ? RunConfig{} : load_run_config(path);
    if (seed) {
        cfg.seed = *seed;
        cfg.synth.master_seed = *seed;
    }
    if (!out.empty()) cfg.out = out;
    return cfg;
}

void dump_heatmaps(const DatasetManifest& manifest, const HeatmapConfig& heatmap_cfg,
                   const std::string& out_dir) {
    for (const Sample& s : manifest.samples) {
        HeatmapConfig cfg = heatmap_cfg;
        cv::Mat1b img = cv::imread((fs::path(manifest.root) / s.image_path).string(),
                                   cv::IMREAD_GRAYSCALE);
        cfg.image_size = img.rows;
        const HeatmapStack stack = render_stack(s.landmarks, cfg);
        for (int c = 0; c < stack.k(); ++c) {
            cv::Mat1b channel;
            stack.maps[c].convertTo(channel, CV_8U, 255.0);
            fs::path dst = fs::path(out_dir) / "heatmaps" / s.image_path;
            dst.replace_extension("");
            fs::create_directories(dst.parent_path());
            cv::imwrite(dst.string() + "-" + s.landmarks.names[c] + ".png", channel);
        }
    }
}

int cmd_gen_data(const std::string& config_path, const std::string& out,
                 std::optional<std::uint64_t> seed, bool dump) {
    RunConfig cfg = load_config_or_default(config_path, seed, out);
    const std::string root = out.empty() ? cfg.out : out;
    const DatasetManifest manifest = build_dataset(cfg.synth, root);
    write_provenance(root, "gen-data", cfg.digest(), cfg.to_json_text(), cfg.seed);
    if (dump) dump_heatmaps(manifest, cfg.heatmap, root);
    std::cout << "generated " << manifest.samples.size() << " samples under " << root << "\n";
    return 0;
}

int cmd_split(const std::string& data_root, const std::string& out, int per_id_gallery,
              std::uint64_t seed) {
    const DatasetManifest manifest = load_annotations(data_root);
    Rng rng = make_rng(seed);
    const DatasetManifest split = build_real_splits(manifest, per_id_gallery, rng);
    const DatasetManifest placed = materialize_manifest(split, out);
    RunConfig cfg;
    cfg.seed = seed;
    cfg.eval.per_id_gallery = per_id_gallery;
    write_provenance(out, "split --per-id-gallery " + std::to_string(per_id_gallery), cfg.digest(),
                     cfg.to_json_text(), seed);
    std::cout << "gallery=" << placed.indices_of(Split::gallery).size()
              << " query=" << placed.indices_of(Split::query).size() << " under " << out << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_root, const std::string& mode,
              const std::string& resume, const std::string& out,
              std::optional<std::uint64_t> seed) {
    RunConfig cfg = load_config_or_default(config_path, seed, out);
    const std::string run_dir = out.empty() ? cfg.out : out;
    const std::optional<std::string> resume_opt =
        resume.empty() ? std::nullopt : std::make_optional(resume);
    const std::string ckpt =
        run_pipeline(cfg, mode_from_string(mode), data_root, run_dir, resume_opt);
    std::cout << "final checkpoint: " << ckpt << "\n";
    return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& gallery_root,
             const std::string& query_root, const std::string& out_path) {
    const Model model = load_checkpoint_model(checkpoint);
    const HeatmapConfig heatmap_cfg = checkpoint_heatmap_config(checkpoint);

    const DatasetManifest gallery_manifest = load_annotations(gallery_root);
    const auto gallery = embed_all(model, gallery_manifest,
                                   gallery_manifest.indices_of(Split::gallery), heatmap_cfg);
    std::vector<EmbeddingRecord> queries;
    if (query_root == gallery_root) {
        queries = embed_all(model, gallery_manifest, gallery_manifest.indices_of(Split::query),
                            heatmap_cfg);
    } else {
        const DatasetManifest query_manifest = load_annotations(query_root);
        queries = embed_all(model, query_manifest, query_manifest.indices_of(Split::query),
                            heatmap_cfg);
    }
    RetrievalReport report = topk_accuracy(queries, gallery);
    report.save_json(out_path);
    const fs::path dir = fs::path(out_path).parent_path();
    RunConfig cfg;
    write_provenance(dir.empty() ? "." : dir.string(), "eval --checkpoint " + checkpoint,
                     cfg.digest(), cfg.to_json_text(), 0);
    std::cout << "top1=" << report.top1 << " top5=" << report.top5 << " top10=" << report.top10
              << " -> " << out_path << "\n";
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& data_root,
              const std::string& variable, const std::string& out, double hide_frac,
              std::optional<std::uint64_t> seed) {
    RunConfig cfg = load_config_or_default(config_path, seed, out);
    std::string root = data_root;
    if (hide_frac > 0.0) {
        Rng rng = make_rng(derive_seed(cfg.seed, 0x41deULL));
        const DatasetManifest masked =
            hide_random_landmarks(load_annotations(data_root), hide_frac, rng);
        root = (fs::path(out) / "masked-data").string();
        materialize_manifest(masked, root);
    }
    SweepVariable var;
    if (variable == "radius")
        var = SweepVariable::heatmap_radius;
    else if (variable == "mla")
        var = SweepVariable::mla;
    else
        throw std::invalid_argument("sweep: --variable must be radius or mla, got " + variable);
    const auto rows = sensitivity_sweep(var, cfg, root, out);
    write_provenance(out, "sweep --variable " + variable, cfg.digest(), cfg.to_json_text(),
                     cfg.seed);
    for (const SweepRow& r : rows)
        std::cout << r.label << ": top1=" << r.top1 << " top5=" << r.top5 << " top10=" << r.top10
                  << "\n";
    return 0;
}

int cmd_plot(const std::vector<std::string>& csvs, const std::string& out) {
    write_accuracy_plot(csvs, out);
    std::cout << "wrote " << out << "\n";
    return 0;
}

}  // namespace

int dispatch(int argc, const char* const* argv) {
    CLI::App app{"landmark-guided re-identification toolkit"};
    app.require_subcommand(1);

    std::string config_path, out, data_root, mode = "baseline", resume, checkpoint;
    std::string gallery_root, query_root, report_path = "report.json", variable = "radius";
    std::vector<std::string> plot_inputs;
    std::optional<std::uint64_t> seed;
    int per_id_gallery = 2;
    double hide_frac = 0.0;
    bool dump = false;

    auto* gen = app.add_subcommand("gen-data", "generate the synthetic dataset");
    gen->add_option("--config", config_path, "config file (JSON)");
    gen->add_option("--out", out, "output dataset root")->required();
    gen->add_option("--seed", seed, "master seed override");
    gen->add_flag("--dump-heatmaps", dump, "write per-channel heatmap PNGs for debugging");

    auto* split = app.add_subcommand("split", "build real-data gallery/query splits");
    split->add_option("--data", data_root, "annotated dataset root")->required();
    split->add_option("--out", out, "output root for the split dataset")->required();
    split->add_option("--per-id-gallery", per_id_gallery, "gallery images per test identity");
    std::uint64_t split_seed = 0;
    split->add_option("--seed", split_seed, "split sampling seed");

    auto* train = app.add_subcommand("train", "run a training pipeline");
    train->add_option("--config", config_path, "config file (JSON)");
    train->add_option("--data", data_root, "dataset root")->required();
    train->add_option("--mode", mode, "baseline | landmark-stage1 | landmark-stage2");
    train->add_option("--resume", resume, "checkpoint to continue from");
    train->add_option("--out", out, "run output directory");
    train->add_option("--seed", seed, "seed override");

    auto* eval = app.add_subcommand("eval", "retrieval evaluation of a checkpoint");
    eval->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
    eval->add_option("--gallery", gallery_root, "dataset root providing the gallery split")->required();
    eval->add_option("--query", query_root, "dataset root providing the query split")->required();
    eval->add_option("--out", report_path, "report JSON path");

    auto* sweep = app.add_subcommand("sweep", "sensitivity study driver");
    sweep->add_option("--config", config_path, "config file (JSON)");
    sweep->add_option("--data", data_root, "dataset root")->required();
    sweep->add_option("--variable", variable, "radius | mla");
    sweep->add_option("--out", out, "sweep output directory")->required();
    sweep->add_option("--hide-frac", hide_frac, "hide one landmark in this fraction of samples");
    sweep->add_option("--seed", seed, "seed override");

    auto* plot = app.add_subcommand("plot", "accuracy-vs-epoch SVG from eval CSVs");
    plot->add_option("csvs", plot_inputs, "eval.csv files")->required();
    plot->add_option("--out", out, "output SVG path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (gen->parsed()) return cmd_gen_data(config_path, out, seed, dump);
        if (split->parsed()) return cmd_split(data_root, out, per_id_gallery, split_seed);
        if (train->parsed()) return cmd_train(config_path, data_root, mode, resume, out, seed);
        if (eval->parsed()) return cmd_eval(checkpoint, gallery_root, query_root, report_path);
        if (sweep->parsed()) return cmd_sweep(config_path, data_root, variable, out, hide_frac, seed);
        if (plot->parsed()) return cmd_plot(plot_inputs, out);
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

}  // namespace lmid
