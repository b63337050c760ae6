// Copyright (C) 2026 Landmark-Id Authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <iostream>

#include "lmid/evalkit.hpp"
#include "lmid/trainer.hpp"

namespace fs = std::filesystem;

namespace lmid {

namespace {

SweepRow run_setting(const RunConfig& cfg, const std::string& label, const std::string& data_root,
                     const std::string& run_dir) {
    const std::string final_ckpt = (fs::path(run_dir) / "stage-2b-final.pt").string();
    if (!fs::exists(final_ckpt)) {
        std::cout << "[sweep] training " << label << " under " << run_dir << "\n";
        run_pipeline(cfg, PipelineMode::landmark_stage2, data_root, run_dir);
    } else {
        std::cout << "[sweep] reusing checkpoint for " << label << "\n";
    }
    const Model model = load_checkpoint_model(final_ckpt);
    const DatasetManifest manifest = load_annotations(data_root);
    HeatmapConfig hm = cfg.heatmap;
    RetrievalReport report = evaluate_retrieval(model, manifest, hm);
    report.config_digest = cfg.digest();
    report.save_json((fs::path(run_dir) / "report.json").string());
    return {label, report.top1, report.top5, report.top10, report.config_digest};
}

}  // namespace

std::vector<SweepRow> sensitivity_sweep(SweepVariable variable, const RunConfig& base,
                                        const std::string& data_root, const std::string& out_dir) {
    std::vector<SweepRow> rows;
    if (variable == SweepVariable::heatmap_radius) {
        for (double radius : {0.05, 0.10, 0.20}) {
            RunConfig cfg = base;
            cfg.heatmap.radius_frac = radius;
            cfg.trainer.augment.nla = true;
            const int pct = static_cast<int>(radius * 100 + 0.5);
            const std::string run_dir = (fs::path(out_dir) / ("radius-" + std::to_string(pct))).string();
            rows.push_back(run_setting(cfg, "Landmark-Id, hm " + std::to_string(pct) + "%",
                                       data_root, run_dir));
        }
    } else {
        for (bool with_mla : {true, false}) {
            RunConfig cfg = base;
            cfg.trainer.augment.mla = with_mla;
            const std::string name = with_mla ? "with-mla" : "no-mla";
            const std::string run_dir = (fs::path(out_dir) / name).string();
            rows.push_back(run_setting(
                cfg, std::string("Landmark-Id, ") + (with_mla ? "with MLA" : "no MLA"), data_root,
                run_dir));
        }
    }
    write_sweep_table(rows, (fs::path(out_dir) / "table.csv").string());
    return rows;
}

}  // namespace lmid
